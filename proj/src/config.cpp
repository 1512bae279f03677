#include "nucgrade/trainconfig.hpp"

#include "nucgrade/errors.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace nucgrade {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: bad number for " + key + ": '" + value + "'");
  }
}

long long parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer for " + key + ": '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "on") return true;
  if (value == "0" || value == "false" || value == "off") return false;
  throw ConfigError("config: bad boolean for " + key + ": '" + value + "'");
}

template <std::size_t N>
void parse_int_array(const std::string& key, const std::string& value, std::array<int, N>& out) {
  const auto items = split_list(value);
  if (items.size() != N) {
    throw ConfigError("config: " + key + " needs " + std::to_string(N) + " comma-separated values");
  }
  for (std::size_t i = 0; i < N; ++i) out[i] = int(parse_int(key, items[i]));
}

void apply_key(TrainConfig& cfg, const std::string& key, const std::string& value) {
  auto& net = cfg.network;
  auto& post = cfg.postprocess;
  auto& lw = cfg.loss_weights;

  if (key == "data_dir") {
    cfg.data_dir = value;
  } else if (key == "split") {
    const auto items = split_list(value);
    if (items.size() != 3) throw ConfigError("config: split needs three fractions");
    for (std::size_t i = 0; i < 3; ++i) cfg.split[i] = parse_double(key, items[i]);
  } else if (key == "split_seed") {
    cfg.split_seed = std::uint64_t(parse_int(key, value));
  } else if (key == "epochs_frozen") {
    cfg.epochs_frozen = int(parse_int(key, value));
  } else if (key == "epochs_finetune") {
    cfg.epochs_finetune = int(parse_int(key, value));
  } else if (key == "lr_initial") {
    cfg.lr_initial = parse_double(key, value);
  } else if (key == "lr_after") {
    cfg.lr_after = parse_double(key, value);
  } else if (key == "lr_drop_epoch") {
    cfg.lr_drop_epoch = int(parse_int(key, value));
  } else if (key == "batch_size") {
    cfg.batch_size = int(parse_int(key, value));
  } else if (key == "augmentations") {
    cfg.augmentations.clear();
    for (const auto& item : split_list(value)) cfg.augmentations.push_back(parse_aug_op(item));
  } else if (key == "seed") {
    cfg.seed = std::uint64_t(parse_int(key, value));
  } else if (key == "deterministic") {
    cfg.deterministic = parse_bool(key, value);
  } else if (key == "loss_weights.lambda_bc") {
    lw.lambda_bc = parse_double(key, value);
  } else if (key == "loss_weights.lambda_dist") {
    lw.lambda_dist = parse_double(key, value);
  } else if (key == "loss_weights.lambda_mc1") {
    lw.lambda_mc1 = parse_double(key, value);
  } else if (key == "loss_weights.lambda_mc2") {
    lw.lambda_mc2 = parse_double(key, value);
  } else if (key == "loss_weights.lambda_mcf") {
    lw.lambda_mcf = parse_double(key, value);
  } else if (key == "network.input_size") {
    std::array<int, 2> hw{};
    parse_int_array(key, value, hw);
    net.input_h = hw[0];
    net.input_w = hw[1];
  } else if (key == "network.backbone_widths") {
    parse_int_array(key, value, net.backbone_widths);
  } else if (key == "network.backbone_blocks") {
    parse_int_array(key, value, net.backbone_blocks);
  } else if (key == "network.hrfe_stream_widths") {
    parse_int_array(key, value, net.hrfe_stream_widths);
  } else if (key == "network.hrfe_exchanges") {
    net.hrfe_exchanges = int(parse_int(key, value));
  } else if (key == "network.hrfe_blocks") {
    net.hrfe_blocks = int(parse_int(key, value));
  } else if (key == "network.lunet_widths") {
    parse_int_array(key, value, net.lunet_widths);
  } else if (key == "network.use_gc_attention") {
    net.use_gc_attention = parse_bool(key, value);
  } else if (key == "network.n_final_classes") {
    net.n_final_classes = int(parse_int(key, value));
  } else if (key == "network.n_task_classes") {
    net.n_task_classes = int(parse_int(key, value));
  } else if (key == "network.min_input_divisor") {
    net.min_input_divisor = int(parse_int(key, value));
  } else if (key == "network.variant") {
    if (value == "full") {
      net.variant = NetworkConfig::Variant::kFull;
    } else if (value == "single_head") {
      net.variant = NetworkConfig::Variant::kSingleHead;
    } else {
      throw ConfigError("config: network.variant must be 'full' or 'single_head'");
    }
  } else if (key == "postprocess.mask_threshold") {
    post.mask_threshold = parse_double(key, value);
  } else if (key == "postprocess.peak_min_value") {
    post.peak_min_value = parse_double(key, value);
  } else if (key == "postprocess.peak_radius") {
    post.peak_radius = int(parse_int(key, value));
  } else if (key == "postprocess.smoothing") {
    if (value == "none") {
      post.smoothing = Smoothing::kNone;
    } else if (value == "mean3x3") {
      post.smoothing = Smoothing::kMean3x3;
    } else {
      throw ConfigError("config: postprocess.smoothing must be 'none' or 'mean3x3'");
    }
  } else if (key == "postprocess.min_instance_area") {
    post.min_instance_area = int(parse_int(key, value));
  } else {
    throw ConfigError("config: unknown key '" + key + "'");
  }
}

}  // namespace

void TrainConfig::validate() const {
  const double sum = split[0] + split[1] + split[2];
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("config: split fractions must sum to 1");
  for (double f : split)
    if (f < 0.0) throw ConfigError("config: split fractions must be non-negative");
  if (epochs_frozen < 0 || epochs_finetune < 0) {
    throw ConfigError("config: epoch counts must be non-negative");
  }
  if (lr_initial <= 0.0 || lr_after <= 0.0) throw ConfigError("config: learning rates must be positive");
  if (lr_drop_epoch < 0) throw ConfigError("config: lr_drop_epoch must be non-negative");
  if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
  if (loss_weights.lambda_bc < 0 || loss_weights.lambda_dist < 0 || loss_weights.lambda_mc1 < 0 ||
      loss_weights.lambda_mc2 < 0 || loss_weights.lambda_mcf < 0) {
    throw ConfigError("config: loss weights must be non-negative");
  }
  if (postprocess.mask_threshold <= 0.0 || postprocess.mask_threshold >= 1.0 ||
      postprocess.peak_min_value <= 0.0 || postprocess.peak_min_value >= 1.0 ||
      postprocess.peak_radius < 1) {
    throw ConfigError("config: postprocess parameters out of range");
  }
  network.validate();
}

TrainConfig parse_train_config_text(const std::string& text) {
  TrainConfig cfg;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: line " + std::to_string(line_no) + " is not key=value");
    }
    apply_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_train_config_text(buf.str());
}

std::string serialize_train_config(const TrainConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  auto list3 = [&](auto a, auto b, auto c) {
    std::ostringstream s;
    s.precision(17);
    s << a << "," << b << "," << c;
    return s.str();
  };
  os << "data_dir=" << cfg.data_dir << "\n";
  os << "split=" << list3(cfg.split[0], cfg.split[1], cfg.split[2]) << "\n";
  os << "split_seed=" << cfg.split_seed << "\n";
  os << "epochs_frozen=" << cfg.epochs_frozen << "\n";
  os << "epochs_finetune=" << cfg.epochs_finetune << "\n";
  os << "lr_initial=" << cfg.lr_initial << "\n";
  os << "lr_after=" << cfg.lr_after << "\n";
  os << "lr_drop_epoch=" << cfg.lr_drop_epoch << "\n";
  os << "batch_size=" << cfg.batch_size << "\n";
  os << "augmentations=";
  for (std::size_t i = 0; i < cfg.augmentations.size(); ++i) {
    os << (i ? "," : "") << aug_op_name(cfg.augmentations[i]);
  }
  os << "\n";
  os << "seed=" << cfg.seed << "\n";
  os << "deterministic=" << (cfg.deterministic ? 1 : 0) << "\n";
  os << "loss_weights.lambda_bc=" << cfg.loss_weights.lambda_bc << "\n";
  os << "loss_weights.lambda_dist=" << cfg.loss_weights.lambda_dist << "\n";
  os << "loss_weights.lambda_mc1=" << cfg.loss_weights.lambda_mc1 << "\n";
  os << "loss_weights.lambda_mc2=" << cfg.loss_weights.lambda_mc2 << "\n";
  os << "loss_weights.lambda_mcf=" << cfg.loss_weights.lambda_mcf << "\n";
  const auto& n = cfg.network;
  os << "network.input_size=" << n.input_h << "," << n.input_w << "\n";
  os << "network.backbone_widths=" << n.backbone_widths[0] << "," << n.backbone_widths[1] << ","
     << n.backbone_widths[2] << "," << n.backbone_widths[3] << "," << n.backbone_widths[4] << "\n";
  os << "network.backbone_blocks=" << n.backbone_blocks[0] << "," << n.backbone_blocks[1] << ","
     << n.backbone_blocks[2] << "," << n.backbone_blocks[3] << "\n";
  os << "network.hrfe_stream_widths=" << n.hrfe_stream_widths[0] << "," << n.hrfe_stream_widths[1]
     << "," << n.hrfe_stream_widths[2] << "\n";
  os << "network.hrfe_exchanges=" << n.hrfe_exchanges << "\n";
  os << "network.hrfe_blocks=" << n.hrfe_blocks << "\n";
  os << "network.lunet_widths=" << n.lunet_widths[0] << "," << n.lunet_widths[1] << ","
     << n.lunet_widths[2] << "\n";
  os << "network.use_gc_attention=" << (n.use_gc_attention ? 1 : 0) << "\n";
  os << "network.n_final_classes=" << n.n_final_classes << "\n";
  os << "network.n_task_classes=" << n.n_task_classes << "\n";
  os << "network.min_input_divisor=" << n.min_input_divisor << "\n";
  os << "network.variant="
     << (n.variant == NetworkConfig::Variant::kFull ? "full" : "single_head") << "\n";
  const auto& p = cfg.postprocess;
  os << "postprocess.mask_threshold=" << p.mask_threshold << "\n";
  os << "postprocess.peak_min_value=" << p.peak_min_value << "\n";
  os << "postprocess.peak_radius=" << p.peak_radius << "\n";
  os << "postprocess.smoothing=" << (p.smoothing == Smoothing::kMean3x3 ? "mean3x3" : "none")
     << "\n";
  os << "postprocess.min_instance_area=" << p.min_instance_area << "\n";
  return os.str();
}

}  // namespace nucgrade
