#include "nucgrade/train.hpp"

#include "nucgrade/augment.hpp"
#include "nucgrade/checkpoint.hpp"
#include "nucgrade/dataset.hpp"
#include "nucgrade/errors.hpp"
#include "nucgrade/network.hpp"
#include "nucgrade/optimizer.hpp"
#include "nucgrade/png_io.hpp"
#include "nucgrade/postprocess.hpp"
#include "nucgrade/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace nucgrade {
namespace {

struct SampleBatch {
  Tensor<float> images;
  Tensor<float> aux;
  TargetTensors<float> targets;
};

SampleBatch build_batch(const std::vector<const LabeledSample*>& samples) {
  std::vector<Tensor<float>> images, aux, binary, distance, task1, task2, final_t;
  for (const LabeledSample* s : samples) {
    const TargetBundle bundle = build_targets(*s);
    const TargetTensors<float> t = to_target_tensors<float>(bundle);
    images.push_back(image_to_tensor<float>(s->image));
    aux.push_back(image_to_tensor<float>(bundle.aux100));
    binary.push_back(t.binary);
    distance.push_back(t.distance);
    task1.push_back(t.task1);
    task2.push_back(t.task2);
    final_t.push_back(t.final);
  }
  SampleBatch b;
  b.images = stack_image_tensors(images);
  b.aux = stack_image_tensors(aux);
  b.targets.binary = stack_image_tensors(binary);
  b.targets.distance = stack_image_tensors(distance);
  b.targets.task1 = stack_image_tensors(task1);
  b.targets.task2 = stack_image_tensors(task2);
  b.targets.final = stack_image_tensors(final_t);
  return b;
}

TypedInstanceMap typed_prediction(const NetworkOutputs& out, const TrainConfig& cfg, int n = 0) {
  if (cfg.network.variant == NetworkConfig::Variant::kSingleHead) {
    return components_from_classes(out.final, cfg.postprocess, n);
  }
  return post_process(out, cfg.postprocess, n);
}

void snapshot_model(ChrNet<float>& model, Checkpoint& ckpt) {
  for (auto* p : model.parameters()) ckpt.arrays[p->name] = p->value.deep_copy();
  for (auto* s : model.bn_stats()) {
    ckpt.arrays[s->name + ".running_mean"] = s->running_mean.deep_copy();
    ckpt.arrays[s->name + ".running_var"] = s->running_var.deep_copy();
  }
}

void restore_model(ChrNet<float>& model, const Checkpoint& ckpt) {
  for (auto* p : model.parameters()) {
    auto it = ckpt.arrays.find(p->name);
    if (it == ckpt.arrays.end() || !(it->second.shape() == p->value.shape())) {
      throw DataError("checkpoint incompatible with network config at parameter " + p->name);
    }
    p->value.vec() = it->second.vec();
  }
  for (auto* s : model.bn_stats()) {
    auto m = ckpt.arrays.find(s->name + ".running_mean");
    auto v = ckpt.arrays.find(s->name + ".running_var");
    if (m == ckpt.arrays.end() || v == ckpt.arrays.end() ||
        !(m->second.shape() == s->running_mean.shape())) {
      throw DataError("checkpoint incompatible with network config at stats " + s->name);
    }
    s->running_mean.vec() = m->second.vec();
    s->running_var.vec() = v->second.vec();
  }
}

void snapshot_adam(ChrNet<float>& model, Adam<float>& adam, Checkpoint& ckpt) {
  const auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    ckpt.arrays["adam.m." + params[i]->name] = adam.moments_m()[i].deep_copy();
    ckpt.arrays["adam.v." + params[i]->name] = adam.moments_v()[i].deep_copy();
  }
  ckpt.meta["adam_step"] = std::to_string(adam.step_count());
}

void restore_adam(ChrNet<float>& model, Adam<float>& adam, const Checkpoint& ckpt) {
  const auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto m = ckpt.arrays.find("adam.m." + params[i]->name);
    auto v = ckpt.arrays.find("adam.v." + params[i]->name);
    if (m == ckpt.arrays.end() || v == ckpt.arrays.end()) {
      throw DataError("checkpoint misses optimizer state for " + params[i]->name);
    }
    adam.moments_m()[i].vec() = m->second.vec();
    adam.moments_v()[i].vec() = v->second.vec();
  }
  auto it = ckpt.meta.find("adam_step");
  adam.set_step_count(it == ckpt.meta.end() ? 0 : std::stoll(it->second));
}

void check_sample_size(const LabeledSample& s, const NetworkConfig& net) {
  if (s.image.height != net.input_h || s.image.width != net.input_w) {
    std::ostringstream os;
    os << s.id << ": sample is " << s.image.height << "x" << s.image.width
       << " but network.input_size is " << net.input_h << "x" << net.input_w;
    throw DataError(os.str());
  }
}

struct EvalRecord {
  std::string id;
  MetricsReport report;
};

// Shared by training-time validation and evaluate_checkpoint.
MetricsReport evaluate_samples(ChrNet<float>& model, const TrainConfig& cfg,
                               const std::vector<LabeledSample>& samples,
                               const std::vector<std::size_t>& indices,
                               std::vector<EvalRecord>* per_image, double* mean_loss) {
  double dice_sum = 0, aji_sum = 0, dq_sum = 0, sq_sum = 0, pq_sum = 0, loss_sum = 0;
  ClassPqAccumulator pooled;
  for (std::size_t idx : indices) {
    const LabeledSample& s = samples[idx];
    const TargetBundle bundle = build_targets(s);
    const NetworkOutputs out =
        model.infer(image_to_tensor<float>(s.image), image_to_tensor<float>(bundle.aux100));
    if (mean_loss) {
      loss_sum += double(total_loss(out, to_target_tensors<float>(bundle), cfg.loss_weights));
    }
    const TypedInstanceMap typed = typed_prediction(out, cfg);
    MetricsReport r = compute_metrics(typed, s.instances, s.classes);
    pooled.add(typed, s.instances, s.classes);
    dice_sum += r.dice;
    aji_sum += r.aji;
    dq_sum += r.dq;
    sq_sum += r.sq;
    pq_sum += r.pq;
    if (per_image) per_image->push_back({s.id, r});
  }
  MetricsReport report;
  const double n = double(indices.size());
  if (!indices.empty()) {
    report.dice = dice_sum / n;
    report.aji = aji_sum / n;
    report.dq = dq_sum / n;
    report.sq = sq_sum / n;
    report.pq = pq_sum / n;
  }
  report.per_class_pq = pooled.per_class_pq();
  report.apq = pooled.apq();
  if (mean_loss) *mean_loss = indices.empty() ? 0.0 : loss_sum / n;
  return report;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const std::string& out_dir, bool resume) {
  cfg.validate();
  fs::create_directories(out_dir);

  std::vector<LabeledSample> samples = load_dataset(cfg.data_dir);
  if (samples.empty()) throw DataError("train: dataset at " + cfg.data_dir + " is empty");
  for (const auto& s : samples) check_sample_size(s, cfg.network);
  const SplitIndices split = split_dataset(samples.size(), cfg.split, cfg.split_seed);
  if (split.train.empty()) throw DataError("train: training split is empty");

  ChrNet<float> model(cfg.network, cfg.seed);
  Adam<float> adam(model.parameters());
  const int total_epochs = cfg.epochs_frozen + cfg.epochs_finetune;
  const std::string config_text = serialize_train_config(cfg);

  TrainResult result;
  result.last_checkpoint = out_dir + "/last.ckpt";
  result.best_checkpoint = out_dir + "/best.ckpt";
  result.final_checkpoint = out_dir + "/final.ckpt";

  int start_epoch = 0;
  double best_apq = -1.0;
  if (resume && fs::exists(result.last_checkpoint)) {
    const Checkpoint ckpt = load_checkpoint(result.last_checkpoint);
    restore_model(model, ckpt);
    restore_adam(model, adam, ckpt);
    start_epoch = std::stoi(ckpt.meta.at("epoch")) + 1;
    auto it = ckpt.meta.find("best_apq");
    if (it != ckpt.meta.end()) best_apq = std::stod(it->second);
  }

  std::ofstream log(out_dir + "/train_log.txt",
                    resume && start_epoch > 0 ? std::ios::app : std::ios::trunc);

  auto save_state = [&](const std::string& path, int epoch) {
    Checkpoint ckpt;
    ckpt.config_text = config_text;
    ckpt.meta["epoch"] = std::to_string(epoch);
    ckpt.meta["seed"] = std::to_string(cfg.seed);
    ckpt.meta["best_apq"] = std::to_string(best_apq);
    snapshot_model(model, ckpt);
    snapshot_adam(model, adam, ckpt);
    save_checkpoint(path, ckpt);
  };

  for (int epoch = start_epoch; epoch < total_epochs; ++epoch) {
    const bool frozen = epoch < cfg.epochs_frozen;
    model.set_backbone_trainable(!frozen);
    const int phase_epoch = frozen ? epoch : epoch - cfg.epochs_frozen;
    const double lr = phase_epoch < cfg.lr_drop_epoch ? cfg.lr_initial : cfg.lr_after;

    // deterministic per-epoch shuffle
    std::vector<std::size_t> order = split.train;
    RandomStream shuffle_rng(derive_seed(cfg.seed, 0xe90c, std::uint64_t(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[std::size_t(shuffle_rng.uniform_int(std::uint64_t(i)))]);
    }

    double loss_sum = 0.0;
    int n_batches = 0;
    for (std::size_t batch_start = 0; batch_start < order.size();
         batch_start += std::size_t(cfg.batch_size)) {
      const std::size_t batch_end =
          std::min(order.size(), batch_start + std::size_t(cfg.batch_size));
      std::vector<LabeledSample> augmented;
      std::vector<const LabeledSample*> members;
      augmented.reserve(batch_end - batch_start);
      for (std::size_t k = batch_start; k < batch_end; ++k) {
        const std::size_t idx = order[k];
        if (cfg.augmentations.empty()) {
          members.push_back(&samples[idx]);
        } else {
          augmented.push_back(augment(samples[idx], cfg.augmentations,
                                      derive_seed(cfg.seed, std::uint64_t(epoch) + 1, idx)));
          members.push_back(&augmented.back());
        }
      }
      const SampleBatch batch = build_batch(members);
      Graph<float> g(true);
      const OutputIds<float> ids = model.forward(g, batch.images, batch.aux);
      const int loss_id = total_loss_node(g, ids, batch.targets, cfg.loss_weights);
      g.backward(loss_id);
      adam.step(model.parameters(), lr);
      model.zero_grads();
      loss_sum += double(g.value(loss_id)[0]);
      ++n_batches;
    }
    const double train_loss = n_batches ? loss_sum / n_batches : 0.0;
    result.train_loss.push_back(train_loss);

    double val_loss = 0.0;
    double val_apq = -1.0;
    if (!split.val.empty()) {
      const MetricsReport r = evaluate_samples(model, cfg, samples, split.val, nullptr, &val_loss);
      val_apq = r.apq;
    }
    result.val_loss.push_back(val_loss);
    result.val_apq.push_back(val_apq);

    if (val_apq > best_apq) {
      best_apq = val_apq;
      save_state(result.best_checkpoint, epoch);
    }
    save_state(result.last_checkpoint, epoch);

    char line[160];
    std::snprintf(line, sizeof(line),
                  "epoch %d phase %s lr %.2e train_loss %.6f val_loss %.6f val_apq %.4f", epoch,
                  frozen ? "frozen" : "finetune", lr, train_loss, val_loss, val_apq);
    log << line << "\n";
    log.flush();
    result.epochs_completed = epoch + 1;
  }

  save_state(result.final_checkpoint, total_epochs - 1);
  if (!fs::exists(result.best_checkpoint)) {
    fs::copy_file(result.final_checkpoint, result.best_checkpoint,
                  fs::copy_options::overwrite_existing);
  }
  return result;
}

MetricsReport evaluate_checkpoint(const TrainConfig& cfg, const std::string& checkpoint_path,
                                  const std::string& split_name, const std::string& out_dir) {
  cfg.validate();
  if (split_name != "val" && split_name != "test") {
    throw ConfigError("evaluate: split must be 'val' or 'test'");
  }
  fs::create_directories(out_dir);
  std::vector<LabeledSample> samples = load_dataset(cfg.data_dir);
  for (const auto& s : samples) check_sample_size(s, cfg.network);
  const SplitIndices split = split_dataset(samples.size(), cfg.split, cfg.split_seed);
  const auto& indices = split_name == "val" ? split.val : split.test;

  ChrNet<float> model(cfg.network, cfg.seed);
  restore_model(model, load_checkpoint(checkpoint_path));

  std::vector<EvalRecord> per_image;
  const MetricsReport report = evaluate_samples(model, cfg, samples, indices, &per_image, nullptr);

  std::ofstream metrics_out(out_dir + "/metrics.txt", std::ios::trunc);
  metrics_out << serialize_metrics(report);
  std::ofstream breakdown(out_dir + "/per_image.txt", std::ios::trunc);
  for (const auto& rec : per_image) {
    char line[200];
    std::snprintf(line, sizeof(line), "%s dice=%.6f aji=%.6f dq=%.6f sq=%.6f pq=%.6f apq=%.6f",
                  rec.id.c_str(), rec.report.dice, rec.report.aji, rec.report.dq, rec.report.sq,
                  rec.report.pq, rec.report.apq);
    breakdown << line << "\n";
  }
  return report;
}

void predict_dir(const std::string& checkpoint_path, const std::string& images_dir,
                 const std::string& out_dir) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const TrainConfig cfg = parse_train_config_text(ckpt.config_text);
  ChrNet<float> model(cfg.network, cfg.seed);
  restore_model(model, ckpt);
  fs::create_directories(out_dir);

  static constexpr std::uint8_t kClassColor[kNumClasses][3] = {
      {0, 0, 0}, {40, 190, 40}, {235, 205, 0}, {225, 40, 40}, {50, 90, 230}};

  for (const std::string& id : list_sample_ids(images_dir)) {
    const ImagePatch image = read_rgb_png(images_dir + "/" + id + ".img.png");
    if (image.height % 4 != 0 || image.width % 4 != 0) {
      throw DataError(id + ": prediction input must be divisible by 4");
    }
    const NetworkOutputs out =
        model.infer(image_to_tensor<float>(image), image_to_tensor<float>(downsample_4x(image)));
    const TypedInstanceMap typed = typed_prediction(out, cfg);

    Plane<std::uint16_t> inst(typed.instances.height(), typed.instances.width(), 0);
    for (std::size_t i = 0; i < inst.v.size(); ++i) {
      inst.v[i] = std::uint16_t(typed.instances.ids.v[i]);
    }
    write_gray16_png(out_dir + "/" + id + ".inst.png", inst);

    std::ofstream labels(out_dir + "/" + id + ".labels.txt", std::ios::trunc);
    for (const auto& [iid, cls] : typed.labels) {
      labels << iid << " " << int(cls) << " " << class_name(cls) << "\n";
    }

    ImagePatch overlay = image;
    for (int r = 0; r < overlay.height; ++r) {
      for (int c = 0; c < overlay.width; ++c) {
        const std::int32_t iid = typed.instances.ids(r, c);
        if (iid == 0) continue;
        const auto it = typed.labels.find(iid);
        const int cls = it == typed.labels.end() ? 0 : it->second;
        for (int ch = 0; ch < 3; ++ch) {
          overlay.at(r, c, ch) = std::uint8_t(
              (overlay.at(r, c, ch) * 55 + int(kClassColor[cls][ch]) * 45) / 100);
        }
      }
    }
    write_rgb_png(out_dir + "/" + id + ".overlay.png", overlay);
  }
}

MetricsReport metrics_compare(const std::string& pred_dir, const std::string& truth_dir,
                              std::string* per_image_out) {
  const std::vector<std::string> ids = list_sample_ids(truth_dir);
  if (ids.empty()) throw DataError("metrics: no samples in " + truth_dir);

  double dice_sum = 0, aji_sum = 0, dq_sum = 0, sq_sum = 0, pq_sum = 0;
  ClassPqAccumulator pooled;
  std::ostringstream lines;
  for (const std::string& id : ids) {
    const LabeledSample truth = load_sample(truth_dir, id);
    const LabeledSample pred = load_sample(pred_dir, id);
    if (pred.image.height != truth.image.height || pred.image.width != truth.image.width) {
      throw DataError(id + ": prediction and truth shapes differ");
    }
    // per-instance label = majority class code over the instance's pixels
    TypedInstanceMap typed;
    typed.instances = pred.instances;
    const std::int32_t max_id = pred.instances.max_id();
    std::vector<std::array<long, kNumClasses>> votes(std::size_t(max_id) + 1,
                                                   std::array<long, kNumClasses>{});
    for (std::size_t i = 0; i < pred.instances.ids.v.size(); ++i) {
      const std::int32_t iid = pred.instances.ids.v[i];
      const int cls = pred.classes.classes.v[i];
      if (iid > 0 && cls > 0 && cls < kNumClasses) ++votes[std::size_t(iid)][std::size_t(cls)];
    }
    for (std::int32_t iid = 1; iid <= max_id; ++iid) {
      int best = 1;
      long best_votes = -1;
      for (int cls = 1; cls < kNumClasses; ++cls) {
        if (votes[std::size_t(iid)][std::size_t(cls)] > best_votes) {
          best_votes = votes[std::size_t(iid)][std::size_t(cls)];
          best = cls;
        }
      }
      typed.labels[iid] = std::uint8_t(best);
    }
    const MetricsReport r = compute_metrics(typed, truth.instances, truth.classes);
    pooled.add(typed, truth.instances, truth.classes);
    dice_sum += r.dice;
    aji_sum += r.aji;
    dq_sum += r.dq;
    sq_sum += r.sq;
    pq_sum += r.pq;
    char line[200];
    std::snprintf(line, sizeof(line), "%s dice=%.6f aji=%.6f dq=%.6f sq=%.6f pq=%.6f apq=%.6f",
                  id.c_str(), r.dice, r.aji, r.dq, r.sq, r.pq, r.apq);
    lines << line << "\n";
  }
  MetricsReport report;
  const double n = double(ids.size());
  report.dice = dice_sum / n;
  report.aji = aji_sum / n;
  report.dq = dq_sum / n;
  report.sq = sq_sum / n;
  report.pq = pq_sum / n;
  report.per_class_pq = pooled.per_class_pq();
  report.apq = pooled.apq();
  if (per_image_out) *per_image_out = lines.str();
  return report;
}

}  // namespace nucgrade
