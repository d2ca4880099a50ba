#include "segcolor/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace segcolor {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument("not a boolean: " + v);
}

Rgb parse_rgb(const std::string& v) {
  std::istringstream in(v);
  int r, g, b;
  char c1, c2;
  if (!(in >> r >> c1 >> g >> c2 >> b) || c1 != ',' || c2 != ',' || r < 0 || r > 255 || g < 0 ||
      g > 255 || b < 0 || b > 255) {
    throw std::invalid_argument("not an r,g,b triple: " + v);
  }
  return {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g),
          static_cast<std::uint8_t>(b)};
}

std::string rgb_to_string(Rgb c) {
  return std::to_string(c.r) + "," + std::to_string(c.g) + "," + std::to_string(c.b);
}

}  // namespace

void apply_config_override(TrainConfig& c, const std::string& key, const std::string& value) {
  try {
    if (key == "epochs") c.epochs = std::stoi(value);
    else if (key == "batch_size") c.batch_size = std::stoi(value);
    else if (key == "learning_rate") c.learning_rate = std::stod(value);
    else if (key == "train_resize") c.train_resize = std::stoi(value);
    else if (key == "ref_offset_range") c.ref_offset_range = std::stoi(value);
    else if (key == "allow_zero_offset") c.allow_zero_offset = parse_bool(value);
    else if (key == "refs_per_step") c.refs_per_step = std::stoi(value);
    else if (key == "seed") c.seed = std::stoull(value);
    else if (key == "lambda_ce") c.lambda_ce = std::stod(value);
    else if (key == "lambda_dc") c.lambda_dc = std::stod(value);
    else if (key == "temperature") c.temperature = std::stod(value);
    else if (key == "consistency_scale") c.consistency_scale = std::stod(value);
    else if (key == "pooling") {
      if (value != "native" && value != "fixed512") {
        throw std::invalid_argument("pooling must be native or fixed512");
      }
      c.pooling = value;
    } else if (key == "fixed_pool_side") c.fixed_pool_side = std::stoi(value);
    else if (key == "pool_norm") {
      if (value != "mask" && value != "spatial") {
        throw std::invalid_argument("pool_norm must be mask or spatial");
      }
      c.pool_norm = value;
    } else if (key == "line_threshold") c.line_threshold = std::stoi(value);
    else if (key == "mono") c.mono = parse_bool(value);
    else if (key == "backbone") c.backbone = value;
    else if (key == "background_color") c.background_color = parse_rgb(value);
    else if (key == "background_area_fraction") c.background_area_fraction = std::stod(value);
    else if (key == "deterministic") c.deterministic = parse_bool(value);
    else if (key == "checkpoint_keep") c.checkpoint_keep = std::stoi(value);
    else throw std::invalid_argument("unknown config key: " + key);
  } catch (const std::invalid_argument&) {
    throw;
  } catch (const std::exception&) {
    throw std::invalid_argument("bad value for " + key + ": " + value);
  }
}

TrainConfig parse_config_text(const std::string& text) {
  TrainConfig config;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    std::size_t eq = s.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + " has no '='");
    }
    apply_config_override(config, trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
  return config;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot read config: " + path.string());
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

std::map<std::string, std::string> config_to_map(const TrainConfig& c) {
  auto fmt = [](double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
  };
  return {
      {"epochs", std::to_string(c.epochs)},
      {"batch_size", std::to_string(c.batch_size)},
      {"learning_rate", fmt(c.learning_rate)},
      {"train_resize", std::to_string(c.train_resize)},
      {"ref_offset_range", std::to_string(c.ref_offset_range)},
      {"allow_zero_offset", c.allow_zero_offset ? "true" : "false"},
      {"refs_per_step", std::to_string(c.refs_per_step)},
      {"seed", std::to_string(c.seed)},
      {"lambda_ce", fmt(c.lambda_ce)},
      {"lambda_dc", fmt(c.lambda_dc)},
      {"temperature", fmt(c.temperature)},
      {"consistency_scale", fmt(c.consistency_scale)},
      {"pooling", c.pooling},
      {"fixed_pool_side", std::to_string(c.fixed_pool_side)},
      {"pool_norm", c.pool_norm},
      {"line_threshold", std::to_string(c.line_threshold)},
      {"mono", c.mono ? "true" : "false"},
      {"backbone", c.backbone},
      {"background_color", rgb_to_string(c.background_color)},
      {"background_area_fraction", fmt(c.background_area_fraction)},
      {"deterministic", c.deterministic ? "true" : "false"},
      {"checkpoint_keep", std::to_string(c.checkpoint_keep)},
  };
}

std::string config_to_text(const TrainConfig& config) {
  std::string out;
  for (const auto& [key, value] : config_to_map(config)) {
    out += key + " = " + value + "\n";
  }
  return out;
}

TrainConfig config_from_map(const std::map<std::string, std::string>& map) {
  TrainConfig config;
  for (const auto& [key, value] : map) {
    apply_config_override(config, key, value);
  }
  return config;
}

}  // namespace segcolor
