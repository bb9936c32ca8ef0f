#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "hbma/errors.hpp"
#include "hbma/io.hpp"

namespace hbma {

namespace {

constexpr const char* kModule = "io-formats";

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string normalize_key(std::string_view key) {
  std::string out;
  bool space = false;
  for (char c : trim(key)) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = true;
      continue;
    }
    if (space && !out.empty()) out += ' ';
    space = false;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

std::vector<std::string> split_list(const std::string& value) {
  std::string inner = trim(value);
  if (!inner.empty() && inner.front() == '{') inner.erase(0, 1);
  if (!inner.empty() && inner.back() == '}') inner.pop_back();
  std::vector<std::string> items;
  std::stringstream ss(inner);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

double parse_double(const std::string& text, const std::string& key) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (trim(text.substr(used)).empty()) return v;
  } catch (const std::exception&) {
  }
  throw ParseError(kModule, "header key '" + key + "' has non-numeric value '" + text + "'");
}

std::size_t parse_count(const std::map<std::string, std::string>& kv, const std::string& key, bool required,
                        std::size_t fallback = 0) {
  auto it = kv.find(key);
  if (it == kv.end()) {
    if (required) throw ParseError(kModule, "header is missing required key '" + key + "'");
    return fallback;
  }
  const double v = parse_double(trim(it->second), key);
  if (v < 0 || v != std::floor(v)) throw ParseError(kModule, "header key '" + key + "' must be a non-negative integer");
  return static_cast<std::size_t>(v);
}

bool is_nanometers(const std::string& units, const std::vector<double>& values) {
  const std::string u = lower(trim(units));
  if (u == "nanometers" || u == "nanometer" || u == "nm") return true;
  if (u == "micrometers" || u == "micrometer" || u == "microns" || u == "micron" || u == "um" || u == "\xc2\xb5m") {
    return false;
  }
  if (!u.empty() && u != "unknown") throw ParseError(kModule, "header key 'wavelength units' has unsupported value '" + units + "'");
  // Unlabeled: reflectance sensors work in 0.3-3 um, i.e. 300-3000 nm.
  return !values.empty() && values.back() > 100.0;
}

template <typename T>
T load_scalar(const unsigned char* p, bool swap) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, p, sizeof(T));
  if (swap) std::reverse(buf, buf + sizeof(T));
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

template <typename T>
void store_scalar(unsigned char* p, T v, bool swap) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if (swap) std::reverse(buf, buf + sizeof(T));
  std::memcpy(p, buf, sizeof(T));
}

std::size_t linear_index(Interleave il, std::size_t r, std::size_t c, std::size_t b, std::size_t lines,
                         std::size_t samples, std::size_t bands) {
  switch (il) {
    case Interleave::bsq: return (b * lines + r) * samples + c;
    case Interleave::bil: return (r * bands + b) * samples + c;
    case Interleave::bip: return (r * samples + c) * bands + b;
  }
  return 0;
}

bool host_is_big_endian() { return std::endian::native == std::endian::big; }

}  // namespace

std::string to_string(Interleave interleave) {
  switch (interleave) {
    case Interleave::bsq: return "bsq";
    case Interleave::bil: return "bil";
    case Interleave::bip: return "bip";
  }
  return "bsq";
}

std::size_t EnviHeader::element_size() const {
  switch (data_type) {
    case 2:
    case 12: return 2;
    case 4: return 4;
    case 5: return 8;
    default: throw ParseError(kModule, "header key 'data type' has unsupported code " + std::to_string(data_type));
  }
}

std::vector<double> EnviHeader::wavelengths_um() const {
  std::vector<double> out = wavelength;
  if (is_nanometers(wavelength_units, wavelength)) {
    for (double& w : out) w /= 1000.0;
  }
  return out;
}

EnviHeader parse_envi_header(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  bool magic = false;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    magic = trim(line) == "ENVI";
    break;
  }
  if (!magic) throw ParseError(kModule, "header does not start with 'ENVI'");

  std::map<std::string, std::string> kv;
  while (std::getline(in, line)) {
    if (trim(line).empty() || trim(line).front() == ';') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(kModule, "malformed header line '" + trim(line) + "'");
    const std::string key = normalize_key(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (!value.empty() && value.front() == '{') {
      while (value.find('}') == std::string::npos) {
        std::string more;
        if (!std::getline(in, more)) throw ParseError(kModule, "header key '" + key + "' has an unterminated list");
        value += " " + trim(more);
      }
    }
    kv[key] = value;
  }

  EnviHeader h;
  h.samples = parse_count(kv, "samples", true);
  h.lines = parse_count(kv, "lines", true);
  h.bands = parse_count(kv, "bands", true);
  if (h.samples == 0 || h.lines == 0 || h.bands == 0) throw ParseError(kModule, "header counts must be positive");
  h.header_offset = parse_count(kv, "header offset", false, 0);
  h.data_type = static_cast<int>(parse_count(kv, "data type", true));
  (void)h.element_size();
  h.byte_order = static_cast<int>(parse_count(kv, "byte order", false, 0));
  if (h.byte_order != 0 && h.byte_order != 1) throw ParseError(kModule, "header key 'byte order' must be 0 or 1");

  if (auto it = kv.find("interleave"); it != kv.end()) {
    const std::string il = lower(trim(it->second));
    if (il == "bsq") {
      h.interleave = Interleave::bsq;
    } else if (il == "bil") {
      h.interleave = Interleave::bil;
    } else if (il == "bip") {
      h.interleave = Interleave::bip;
    } else {
      throw ParseError(kModule, "header key 'interleave' has unsupported value '" + it->second + "'");
    }
  }

  auto wl = kv.find("wavelength");
  if (wl == kv.end()) throw ParseError(kModule, "header is missing required key 'wavelength'");
  for (const auto& item : split_list(wl->second)) h.wavelength.push_back(parse_double(item, "wavelength"));
  if (h.wavelength.size() != h.bands) {
    throw ParseError(kModule, "header key 'wavelength' lists " + std::to_string(h.wavelength.size()) +
                                  " values for " + std::to_string(h.bands) + " bands");
  }
  if (auto it = kv.find("wavelength units"); it != kv.end()) h.wavelength_units = trim(it->second);
  (void)is_nanometers(h.wavelength_units, h.wavelength);

  if (auto it = kv.find("bbl"); it != kv.end()) {
    for (const auto& item : split_list(it->second)) h.bbl.push_back(parse_double(item, "bbl") != 0.0 ? 1 : 0);
    if (h.bbl.size() != h.bands) throw ParseError(kModule, "header key 'bbl' length does not match bands");
  }
  if (auto it = kv.find("reflectance scale factor"); it != kv.end()) {
    const double f = parse_double(trim(it->second), "reflectance scale factor");
    if (!(f > 0.0) || !std::isfinite(f)) throw ParseError(kModule, "header key 'reflectance scale factor' must be positive");
    h.reflectance_scale_factor = f;
  }
  return h;
}

EnviHeader read_envi_header(const std::filesystem::path& header_path) {
  return parse_envi_header(read_text_file(header_path));
}

std::string format_envi_header(const EnviHeader& h) {
  std::ostringstream out;
  out.precision(17);
  out << "ENVI\n";
  out << "samples = " << h.samples << "\n";
  out << "lines = " << h.lines << "\n";
  out << "bands = " << h.bands << "\n";
  out << "header offset = " << h.header_offset << "\n";
  out << "file type = ENVI Standard\n";
  out << "data type = " << h.data_type << "\n";
  out << "interleave = " << to_string(h.interleave) << "\n";
  out << "byte order = " << h.byte_order << "\n";
  if (h.reflectance_scale_factor) out << "reflectance scale factor = " << *h.reflectance_scale_factor << "\n";
  if (!h.wavelength_units.empty()) out << "wavelength units = " << h.wavelength_units << "\n";
  out << "wavelength = {";
  for (std::size_t i = 0; i < h.wavelength.size(); ++i) out << (i ? ", " : "") << h.wavelength[i];
  out << "}\n";
  if (!h.bbl.empty()) {
    out << "bbl = {";
    for (std::size_t i = 0; i < h.bbl.size(); ++i) out << (i ? ", " : "") << h.bbl[i];
    out << "}\n";
  }
  return out.str();
}

std::filesystem::path find_envi_data(const std::filesystem::path& header_path) {
  std::filesystem::path stem = header_path;
  stem.replace_extension();
  if (std::filesystem::exists(stem) && stem != header_path) return stem;
  for (const char* ext : {".img", ".dat", ".bsq", ".bil", ".bip", ".raw"}) {
    auto candidate = stem;
    candidate += ext;
    if (std::filesystem::exists(candidate)) return candidate;
  }
  throw ParseError(kModule, "no data file found next to header '" + header_path.string() + "'");
}

ImageCube read_envi(const std::filesystem::path& header_path, const std::filesystem::path& data_path) {
  const EnviHeader h = read_envi_header(header_path);
  const std::size_t elem = h.element_size();
  const std::size_t count = h.samples * h.lines * h.bands;

  std::ifstream in(data_path, std::ios::binary);
  if (!in) throw ParseError(kModule, "cannot open data file '" + data_path.string() + "'");
  in.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::size_t>(in.tellg());
  if (file_size != h.header_offset + count * elem) {
    throw ParseError(kModule, "data file size " + std::to_string(file_size) + " does not match samples*lines*bands*" +
                                  std::to_string(elem) + " + header offset = " +
                                  std::to_string(h.header_offset + count * elem));
  }
  std::vector<unsigned char> raw(count * elem);
  in.seekg(static_cast<std::streamoff>(h.header_offset));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) throw ParseError(kModule, "short read from '" + data_path.string() + "'");

  const bool swap = (h.byte_order == 1) != host_is_big_endian();
  double scale = 1.0;
  if (h.data_type == 2 || h.data_type == 12) {
    scale = h.reflectance_scale_factor.value_or(10000.0);
  } else if (h.reflectance_scale_factor) {
    scale = *h.reflectance_scale_factor;
  }

  std::vector<std::size_t> keep;
  for (std::size_t b = 0; b < h.bands; ++b) {
    if (h.bbl.empty() || h.bbl[b] != 0) keep.push_back(b);
  }
  if (keep.size() < 2) throw ParseError(kModule, "fewer than 2 good bands after applying 'bbl'");
  const std::vector<double> all_um = h.wavelengths_um();
  std::vector<double> kept_um;
  for (std::size_t b : keep) kept_um.push_back(all_um[b]);
  GridPtr grid;
  try {
    grid = make_grid(std::move(kept_um));
  } catch (const InputError& e) {
    throw ParseError(kModule, std::string("header key 'wavelength': ") + e.what());
  }

  std::vector<double> data(h.lines * h.samples * keep.size());
  for (std::size_t r = 0; r < h.lines; ++r) {
    for (std::size_t c = 0; c < h.samples; ++c) {
      for (std::size_t k = 0; k < keep.size(); ++k) {
        const unsigned char* p = raw.data() + linear_index(h.interleave, r, c, keep[k], h.lines, h.samples, h.bands) * elem;
        double v = 0.0;
        switch (h.data_type) {
          case 2: v = load_scalar<std::int16_t>(p, swap); break;
          case 12: v = load_scalar<std::uint16_t>(p, swap); break;
          case 4: v = load_scalar<float>(p, swap); break;
          case 5: v = load_scalar<double>(p, swap); break;
        }
        if (!std::isfinite(v)) {
          throw ParseError(kModule, "non-finite value at row " + std::to_string(r) + ", col " + std::to_string(c));
        }
        data[(r * h.samples + c) * keep.size() + k] = v / scale;
      }
    }
  }
  return ImageCube(h.lines, h.samples, std::move(grid), std::move(data));
}

ImageCube read_envi(const std::filesystem::path& header_path) { return read_envi(header_path, find_envi_data(header_path)); }

void write_envi(const ImageCube& cube, const std::filesystem::path& header_path, const std::filesystem::path& data_path,
                const EnviWriteOptions& options) {
  EnviHeader h;
  h.samples = cube.cols();
  h.lines = cube.rows();
  h.bands = cube.bands();
  h.interleave = options.interleave;
  h.data_type = options.data_type;
  h.byte_order = options.byte_order;
  h.reflectance_scale_factor = options.reflectance_scale_factor;
  h.bbl = options.bbl;
  h.wavelength_units = options.wavelength_units;
  const bool nm = is_nanometers(options.wavelength_units, {});
  for (double w : cube.grid()->wavelengths()) h.wavelength.push_back(nm ? w * 1000.0 : w);
  if (!h.bbl.empty() && h.bbl.size() != h.bands) throw InputError(kModule, "bbl length does not match bands");

  const std::size_t elem = h.element_size();
  const bool integer = h.data_type == 2 || h.data_type == 12;
  const double scale = integer ? h.reflectance_scale_factor.value_or(10000.0) : h.reflectance_scale_factor.value_or(1.0);
  const bool swap = (h.byte_order == 1) != host_is_big_endian();
  std::vector<unsigned char> raw(h.samples * h.lines * h.bands * elem);
  for (std::size_t r = 0; r < h.lines; ++r) {
    for (std::size_t c = 0; c < h.samples; ++c) {
      for (std::size_t b = 0; b < h.bands; ++b) {
        unsigned char* p = raw.data() + linear_index(h.interleave, r, c, b, h.lines, h.samples, h.bands) * elem;
        const double v = cube.at(r, c, b) * scale;
        switch (h.data_type) {
          case 2: store_scalar<std::int16_t>(p, static_cast<std::int16_t>(std::lround(v)), swap); break;
          case 12: store_scalar<std::uint16_t>(p, static_cast<std::uint16_t>(std::lround(v)), swap); break;
          case 4: store_scalar<float>(p, static_cast<float>(v), swap); break;
          case 5: store_scalar<double>(p, v, swap); break;
        }
      }
    }
  }
  write_text_file(header_path, format_envi_header(h));
  std::ofstream out(data_path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError(kModule, "cannot write '" + data_path.string() + "'");
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw InputError(kModule, "failed writing '" + data_path.string() + "'");
}

}  // namespace hbma
