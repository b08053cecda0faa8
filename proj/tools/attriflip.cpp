// attriflip: train binary attribute networks on a synthetic corpus, generate
// minimal adversarial perturbations (FGS / FFA), score them with PASS and
// reproduce the experiment reports.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "attriflip/attack.hpp"
#include "attriflip/checkpoint.hpp"
#include "attriflip/config.hpp"
#include "attriflip/datagen.hpp"
#include "attriflip/harness.hpp"
#include "attriflip/kernels.hpp"
#include "attriflip/nn.hpp"
#include "attriflip/png_io.hpp"
#include "attriflip/rng.hpp"
#include "attriflip/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace attriflip;

namespace {

constexpr const char* kVersion = "0.1.0";

struct CommonOpts {
  std::string config_path;
  Config config;

  void load() {
    if (!config_path.empty()) config = Config::from_file(config_path);
  }
};

TrainConfig train_config_from(const Config& c) {
  TrainConfig t;
  t.batch_size = c.get_int("batch_size", t.batch_size);
  t.base_learning_rate = c.get_double("base_learning_rate", t.base_learning_rate);
  t.rms_decay = c.get_double("rms_decay", t.rms_decay);
  t.epsilon = c.get_double("epsilon", t.epsilon);
  t.inv_decay_gamma = c.get_double("inv_decay_gamma", t.inv_decay_gamma);
  t.inv_decay_power = c.get_double("inv_decay_power", t.inv_decay_power);
  t.max_epochs = c.get_int("max_epochs", t.max_epochs);
  t.patience = c.get_int("patience", t.patience);
  t.seed = c.get_u64("seed", t.seed);
  return t;
}

SearchConfig search_config_from(const Config& c) {
  SearchConfig s;
  s.initial_step = c.get_double("initial_step", s.initial_step);
  s.max_doublings = c.get_int("max_doublings", s.max_doublings);
  s.binary_search_iterations =
      c.get_int("binary_search_iterations", s.binary_search_iterations);
  s.pass_threshold = c.get_double("pass_threshold", s.pass_threshold);
  s.quantize_retries = c.get_int("quantize_retries", s.quantize_retries);
  return s;
}

LossKind loss_from_string(const std::string& s) {
  if (s == "euclidean") return LossKind::Euclidean;
  if (s == "softmax") return LossKind::Softmax;
  throw CLI::ValidationError("--loss", "must be euclidean or softmax");
}

const char* loss_name(LossKind l) {
  return l == LossKind::Euclidean ? "euclidean" : "softmax";
}

void ensure_run_dirs(const std::string& run_dir) {
  fs::create_directories(fs::path(run_dir) / "checkpoints");
  fs::create_directories(fs::path(run_dir) / "outcomes");
  fs::create_directories(fs::path(run_dir) / "reports");
}

// manifest.json records the exact inputs of every command run against this
// run directory. No timestamps: identical invocations must leave identical
// bytes behind.
void update_manifest(const std::string& run_dir, const std::string& command,
                     const json& entry) {
  fs::path path = fs::path(run_dir) / "manifest.json";
  json manifest;
  if (fs::exists(path)) {
    std::ifstream is(path);
    is >> manifest;
  }
  manifest["tool"] = "attriflip";
  manifest["version"] = kVersion;
  manifest["kernel_backend"] = kern::ops().name;
  manifest["checkpoint_format"] = "ATTRIFLIP1";
  manifest["commands"][command] = entry;
  std::ofstream os(path, std::ios::trunc);
  os << manifest.dump(2) << '\n';
}

std::string checkpoint_path(const std::string& run_dir,
                            const std::string& attribute, LossKind loss,
                            const std::string& stage) {
  return (fs::path(run_dir) / "checkpoints" /
          (attribute + "_" + loss_name(loss) + "_" + stage + ".afnet"))
      .string();
}

std::map<std::string, Network> load_stage_networks(const std::string& run_dir,
                                                   const Corpus& corpus,
                                                   LossKind loss,
                                                   const std::string& stage) {
  std::map<std::string, Network> nets;
  for (const auto& name : corpus.attribute_names) {
    std::string path = checkpoint_path(run_dir, name, loss, stage);
    if (!fs::exists(path)) {
      std::fprintf(stderr, "warning: missing checkpoint %s\n", path.c_str());
      continue;
    }
    nets.emplace(name, load_checkpoint(path));
  }
  return nets;
}

json search_config_json(const SearchConfig& s) {
  return {{"initial_step", s.initial_step},
          {"max_doublings", s.max_doublings},
          {"binary_search_iterations", s.binary_search_iterations},
          {"pass_threshold", s.pass_threshold},
          {"quantize_retries", s.quantize_retries}};
}

json train_config_json(const TrainConfig& t) {
  return {{"batch_size", t.batch_size},
          {"base_learning_rate", t.base_learning_rate},
          {"rms_decay", t.rms_decay},
          {"epsilon", t.epsilon},
          {"inv_decay_gamma", t.inv_decay_gamma},
          {"inv_decay_power", t.inv_decay_power},
          {"max_epochs", t.max_epochs},
          {"patience", t.patience},
          {"seed", t.seed}};
}

// Writes the successful perturbed images of a harness run as PNGs.
void write_success_images(const HarnessResult& run, const std::string& dir) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < run.records.size(); ++i) {
    const OutcomeRecord& r = run.records[i];
    if (!r.success) continue;
    std::string name = r.attribute + "__" + r.image_id + "__" +
                       direction_kind_name(r.kind) + ".png";
    write_png(run.perturbed[i], (fs::path(dir) / name).string());
  }
}

std::string flippability_tag(const std::string& stage, LossKind loss) {
  return std::string("flippability_") + stage + "_" + loss_name(loss);
}

struct FlippabilityArtifacts {
  std::vector<OutcomeRecord> records;
  HarnessResult run;
};

FlippabilityArtifacts run_flippability_stage(
    const std::string& run_dir, const Corpus& corpus, LossKind loss,
    const std::string& stage, int sample_size, std::uint64_t sample_seed,
    const SearchConfig& search, int workers) {
  std::map<std::string, Network> nets =
      load_stage_networks(run_dir, corpus, loss, stage);
  if (nets.empty())
    throw std::runtime_error("no checkpoints found for stage '" + stage +
                             "' (" + loss_name(loss) + ") under " + run_dir +
                             "/checkpoints");
  std::vector<int> sample = sample_train_indices(corpus, sample_size, sample_seed);
  FlippabilityArtifacts art;
  art.run = run_attacks(nets, corpus, sample, search, workers);
  art.records = art.run.records;

  std::string tag = flippability_tag(stage, loss);
  write_outcome_jsonl(art.records,
                      (fs::path(run_dir) / "outcomes" / (tag + ".jsonl")).string());
  write_success_images(
      art.run, (fs::path(run_dir) / "outcomes" / ("images_" + tag)).string());
  write_flippability_csv(
      aggregate_flippability(art.records),
      (fs::path(run_dir) / "reports" / (tag + ".csv")).string());
  return art;
}

// Rebuilds every report that the persisted outcome records can support.
void regenerate_reports(const std::string& run_dir) {
  fs::path outcomes = fs::path(run_dir) / "outcomes";
  fs::path reports = fs::path(run_dir) / "reports";
  fs::create_directories(reports);
  if (!fs::exists(outcomes))
    throw std::runtime_error("no outcomes directory under " + run_dir);

  std::map<std::string, std::vector<OutcomeRecord>> flippability;
  std::vector<std::string> sorted_names;
  for (const auto& entry : fs::directory_iterator(outcomes))
    if (entry.is_regular_file()) sorted_names.push_back(entry.path().filename().string());
  std::sort(sorted_names.begin(), sorted_names.end());

  json summary;
  summary["tool"] = "attriflip";
  summary["version"] = kVersion;

  for (const auto& name : sorted_names) {
    fs::path path = outcomes / name;
    if (name.rfind("flippability_", 0) == 0 && path.extension() == ".jsonl") {
      std::string tag = name.substr(0, name.size() - 6);  // drop .jsonl
      auto records = read_outcome_jsonl(path.string());
      flippability[tag] = records;
      write_flippability_csv(aggregate_flippability(records),
                             (reports / (tag + ".csv")).string());

      long fgs_plus = 0, fgs_minus = 0, ffa_plus = 0, ffa_minus = 0;
      long minus_attempts_ffa = 0;
      for (const auto& r : records) {
        if (r.kind == DirectionKind::FFA && !r.plus_case) ++minus_attempts_ffa;
        if (!r.success) continue;
        if (r.kind == DirectionKind::FGS)
          (r.plus_case ? fgs_plus : fgs_minus)++;
        else
          (r.plus_case ? ffa_plus : ffa_minus)++;
      }
      json s;
      s["fgs_plus"] = fgs_plus;
      s["fgs_minus"] = fgs_minus;
      s["ffa_plus"] = ffa_plus;
      s["ffa_minus"] = ffa_minus;
      s["ffa_plus_ge_fgs_plus"] = ffa_plus >= fgs_plus;
      if (minus_attempts_ffa > 0)
        s["natural_ffa_fraction"] =
            static_cast<double>(ffa_minus) / minus_attempts_ffa;
      summary["flippability"][tag] = s;
    } else if (name.rfind("portability_", 0) == 0 &&
               path.extension() == ".jsonl") {
      std::string tag = name.substr(0, name.size() - 6);
      auto records = read_portability_jsonl(path.string());
      std::vector<std::string> attrs;
      for (const auto& r : records) {
        if (std::find(attrs.begin(), attrs.end(), r.eval_attribute) ==
            attrs.end())
          attrs.push_back(r.eval_attribute);
      }
      std::sort(attrs.begin(), attrs.end());
      PortabilityMatrix m = aggregate_portability(attrs, records);
      write_portability_csv(m, (reports / (tag + ".csv")).string());
      if (auto d = m.diagonal_mean())
        summary["portability"][tag]["diagonal_mean"] = *d;
    }
  }

  // Stage comparison needs both snapshots of the same loss kind.
  for (const char* loss : {"euclidean", "softmax"}) {
    std::string two = std::string("flippability_two_epochs_") + loss;
    std::string conv = std::string("flippability_converged_") + loss;
    if (flippability.count(two) != 0 && flippability.count(conv) != 0) {
      StageComparison cmp =
          compare_stages(flippability[two], flippability[conv]);
      std::string tag = std::string("stage_comparison_") + loss;
      write_stage_comparison_csv(cmp, (reports / (tag + ".csv")).string());
      json rows = json::array();
      for (const auto& row : cmp.rows)
        rows.push_back({{"kind", direction_kind_name(row.kind)},
                        {"case", row.plus_case ? "plus" : "minus"},
                        {"two_epochs", row.two_epochs},
                        {"converged", row.converged},
                        {"overlap", row.overlap}});
      json fates = json::array();
      for (const auto& f : cmp.fates)
        fates.push_back({{"kind", direction_kind_name(f.kind)},
                         {"naturals_two_epochs", f.naturals_two_epochs},
                         {"ceased", f.ceased},
                         {"became_correct", f.became_correct}});
      summary["stage_comparison"][tag] = {{"rows", rows}, {"fates", fates}};
    }
  }

  std::ofstream os(reports / "summary.json", std::ios::trunc);
  os << summary.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"attribute networks, adversarial flipping and PASS analysis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  // ---- gen-data ----
  auto* gen = app.add_subcommand("gen-data", "render a synthetic corpus");
  std::string gen_out;
  std::uint64_t gen_seed = 7;
  int gen_images = 1000;
  double gen_noise = 10.0;
  gen->add_option("--out", gen_out, "corpus directory")->required();
  gen->add_option("--seed", gen_seed, "generation seed");
  gen->add_option("--images", gen_images, "number of images (>= 100)");
  gen->add_option("--noise", gen_noise, "pixel noise amplitude");

  // ---- train ----
  auto* train = app.add_subcommand("train", "train attribute networks");
  CommonOpts train_common;
  std::string train_corpus, train_run, train_attr = "all",
              train_loss = "euclidean";
  std::optional<std::uint64_t> train_seed;
  std::optional<int> train_max_epochs, train_batch;
  std::optional<double> train_lr;
  train->add_option("--corpus", train_corpus, "corpus directory")->required();
  train->add_option("--run-dir", train_run, "run directory")->required();
  train->add_option("--attribute", train_attr, "attribute name or 'all'");
  train->add_option("--loss", train_loss, "euclidean|softmax");
  train->add_option("--config", train_common.config_path, "config file");
  train->add_option("--seed", train_seed, "training seed override");
  train->add_option("--max-epochs", train_max_epochs, "epoch cap override");
  train->add_option("--batch-size", train_batch, "batch size override");
  train->add_option("--lr", train_lr, "base learning rate override");

  // ---- attack ----
  auto* attack = app.add_subcommand("attack", "attack a single image");
  CommonOpts attack_common;
  std::string atk_corpus, atk_run, atk_attr, atk_image, atk_kind = "ffa",
              atk_stage = "converged", atk_loss = "euclidean", atk_checkpoint;
  double atk_magnify = 50.0;
  attack->add_option("--corpus", atk_corpus, "corpus directory")->required();
  attack->add_option("--run-dir", atk_run, "run directory")->required();
  attack->add_option("--attribute", atk_attr, "attribute name")->required();
  attack->add_option("--image", atk_image, "image id")->required();
  attack->add_option("--kind", atk_kind, "fgs|ffa");
  attack->add_option("--stage", atk_stage, "two_epochs|converged");
  attack->add_option("--loss", atk_loss, "euclidean|softmax");
  attack->add_option("--checkpoint", atk_checkpoint,
                     "explicit checkpoint path (overrides stage/loss)");
  attack->add_option("--magnify", atk_magnify,
                     "delta visualization factor (0 disables)");
  attack->add_option("--config", attack_common.config_path, "config file");

  // ---- flippability ----
  auto* flip = app.add_subcommand("flippability",
                                  "attack a corpus sample on one stage");
  CommonOpts flip_common;
  std::string flip_corpus, flip_run, flip_stage = "converged",
              flip_loss = "euclidean";
  int flip_sample = 200, flip_workers = 0;
  std::uint64_t flip_sample_seed = 1234;
  flip->add_option("--corpus", flip_corpus, "corpus directory")->required();
  flip->add_option("--run-dir", flip_run, "run directory")->required();
  flip->add_option("--stage", flip_stage, "two_epochs|converged");
  flip->add_option("--loss", flip_loss, "euclidean|softmax");
  flip->add_option("--sample", flip_sample, "sample size");
  flip->add_option("--sample-seed", flip_sample_seed, "sample seed");
  flip->add_option("--workers", flip_workers, "attack worker threads");
  flip->add_option("--config", flip_common.config_path, "config file");

  // ---- stages ----
  auto* stages = app.add_subcommand(
      "stages", "flippability at two epochs and convergence, with overlap");
  CommonOpts stages_common;
  std::string stages_corpus, stages_run, stages_loss = "euclidean";
  int stages_sample = 200, stages_workers = 0;
  std::uint64_t stages_sample_seed = 1234;
  stages->add_option("--corpus", stages_corpus, "corpus directory")->required();
  stages->add_option("--run-dir", stages_run, "run directory")->required();
  stages->add_option("--loss", stages_loss, "euclidean|softmax");
  stages->add_option("--sample", stages_sample, "sample size");
  stages->add_option("--sample-seed", stages_sample_seed, "sample seed");
  stages->add_option("--workers", stages_workers, "attack worker threads");
  stages->add_option("--config", stages_common.config_path, "config file");

  // ---- portability ----
  auto* port = app.add_subcommand("portability",
                                  "cross-attribute adversarial portability");
  CommonOpts port_common;
  std::string port_corpus, port_run, port_src = "converged",
              port_eval = "converged", port_kind = "ffa",
              port_loss = "euclidean";
  int port_sample = 200, port_workers = 0;
  std::uint64_t port_sample_seed = 1234;
  port->add_option("--corpus", port_corpus, "corpus directory")->required();
  port->add_option("--run-dir", port_run, "run directory")->required();
  port->add_option("--source-stage", port_src, "two_epochs|converged");
  port->add_option("--eval-stage", port_eval, "two_epochs|converged");
  port->add_option("--kind", port_kind, "fgs|ffa");
  port->add_option("--loss", port_loss, "euclidean|softmax");
  port->add_option("--sample", port_sample, "sample size");
  port->add_option("--sample-seed", port_sample_seed, "sample seed");
  port->add_option("--workers", port_workers, "attack worker threads");
  port->add_option("--config", port_common.config_path, "config file");

  // ---- loss-compare ----
  auto* lc = app.add_subcommand(
      "loss-compare", "Euclidean vs softmax errors, t-test and counts");
  CommonOpts lc_common;
  std::string lc_corpus, lc_run;
  int lc_sample = 200, lc_workers = 0;
  std::uint64_t lc_sample_seed = 1234;
  lc->add_option("--corpus", lc_corpus, "corpus directory")->required();
  lc->add_option("--run-dir", lc_run, "run directory")->required();
  lc->add_option("--sample", lc_sample, "sample size");
  lc->add_option("--sample-seed", lc_sample_seed, "sample seed");
  lc->add_option("--workers", lc_workers, "attack worker threads");
  lc->add_option("--config", lc_common.config_path, "config file");

  // ---- report ----
  auto* rep = app.add_subcommand("report",
                                 "rebuild all reports from persisted outcomes");
  std::string rep_run;
  rep->add_option("--run-dir", rep_run, "run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      Corpus corpus =
          generate_corpus(gen_seed, gen_images, default_attributes(), gen_noise);
      save_corpus(corpus, gen_out);
      std::printf("wrote corpus: %zu images, %zu attributes -> %s\n",
                  corpus.items.size(), corpus.attribute_names.size(),
                  gen_out.c_str());
    } else if (train->parsed()) {
      train_common.load();
      TrainConfig cfg = train_config_from(train_common.config);
      if (train_seed) cfg.seed = *train_seed;
      if (train_max_epochs) cfg.max_epochs = *train_max_epochs;
      if (train_batch) cfg.batch_size = *train_batch;
      if (train_lr) cfg.base_learning_rate = *train_lr;
      LossKind loss = loss_from_string(train_loss);

      Corpus corpus = load_corpus(train_corpus);
      ensure_run_dirs(train_run);

      std::vector<std::string> attrs;
      if (train_attr == "all")
        attrs = corpus.attribute_names;
      else
        attrs.push_back(train_attr);

      for (const auto& name : attrs) {
        int idx = corpus.attribute_index(name);
        TrainConfig per = cfg;
        per.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(idx));
        TrainResult res = train_attribute(corpus, idx, loss, per);
        save_checkpoint(res.two_epochs,
                        checkpoint_path(train_run, name, loss, "two_epochs"));
        save_checkpoint(res.converged,
                        checkpoint_path(train_run, name, loss, "converged"));
        write_history_csv(
            res.history,
            (fs::path(train_run) / "reports" /
             ("train_history_" + name + "_" + loss_name(loss) + ".csv"))
                .string());
        std::printf("trained %-14s (%s): best validation error %.4f at epoch %d\n",
                    name.c_str(), loss_name(loss), res.best_validation_error,
                    res.best_epoch);
      }
      json entry = train_config_json(cfg);
      entry["attributes"] = attrs;
      entry["loss"] = loss_name(loss);
      entry["corpus"] = train_corpus;
      update_manifest(train_run, std::string("train_") + loss_name(loss), entry);
    } else if (attack->parsed()) {
      attack_common.load();
      SearchConfig search = search_config_from(attack_common.config);
      Corpus corpus = load_corpus(atk_corpus);
      ensure_run_dirs(atk_run);
      LossKind loss = loss_from_string(atk_loss);

      std::string ckpt = atk_checkpoint.empty()
                             ? checkpoint_path(atk_run, atk_attr, loss, atk_stage)
                             : atk_checkpoint;
      if (!fs::exists(ckpt))
        throw std::runtime_error("missing checkpoint: " + ckpt);
      Network net = load_checkpoint(ckpt);

      int attr_idx = corpus.attribute_index(atk_attr);
      const CorpusItem* item = nullptr;
      for (const auto& it : corpus.items)
        if (it.id == atk_image) item = &it;
      if (item == nullptr)
        throw std::runtime_error("image id not in corpus: " + atk_image);

      DirectionKind kind = direction_kind_from_name(atk_kind);
      AttributeLabel truth = item->labels[attr_idx];
      AttributeLabel predicted = classify(forward(net, normalize(item->image)));
      AttackOutcome outcome =
          predicted == truth
              ? generate_adversarial(net, item->image, truth, kind, search)
              : detect_natural_adversarial(net, item->image, truth, kind, search);

      OutcomeRecord r;
      r.image_id = item->id;
      r.attribute = atk_attr;
      r.kind = kind;
      r.plus_case = outcome.plus_case;
      r.success = outcome.success;
      r.failure = outcome.failure;
      r.flip_weight = outcome.flip_weight;
      r.pass_value = outcome.pass.pass;
      r.class_before = outcome.class_before;
      r.class_after = outcome.class_after;
      std::string tag = "attack_" + atk_attr + "_" + item->id + "_" + atk_kind;
      write_outcome_jsonl({r},
                          (fs::path(atk_run) / "outcomes" / (tag + ".jsonl")).string());
      if (outcome.success || outcome.failure == FailureCode::PassBelowThreshold) {
        write_png(outcome.perturbed,
                  (fs::path(atk_run) / "outcomes" / (tag + ".png")).string());
        if (atk_magnify > 0.0)
          write_png(magnified_delta(item->image, outcome.perturbed, atk_magnify),
                    (fs::path(atk_run) / "outcomes" / (tag + "_delta.png")).string());
      }
      std::printf(
          "%s %s on %s: %s (case %s, failure %s, w=%.6g, PASS=%.4f, %d -> %d)\n",
          atk_kind.c_str(), atk_attr.c_str(), item->id.c_str(),
          outcome.success ? "success" : "failure",
          outcome.plus_case ? "+" : "-", failure_code_name(outcome.failure),
          outcome.flip_weight, outcome.pass.pass, outcome.class_before,
          outcome.class_after);
      json entry = search_config_json(search);
      entry["image"] = item->id;
      entry["attribute"] = atk_attr;
      entry["kind"] = atk_kind;
      update_manifest(atk_run, "attack_" + tag, entry);
    } else if (flip->parsed()) {
      flip_common.load();
      SearchConfig search = search_config_from(flip_common.config);
      Corpus corpus = load_corpus(flip_corpus);
      ensure_run_dirs(flip_run);
      LossKind loss = loss_from_string(flip_loss);
      run_flippability_stage(flip_run, corpus, loss, flip_stage, flip_sample,
                             flip_sample_seed, search, flip_workers);
      std::printf("flippability (%s, %s) written under %s\n", flip_stage.c_str(),
                  loss_name(loss), flip_run.c_str());
      json entry = search_config_json(search);
      entry["sample"] = flip_sample;
      entry["sample_seed"] = flip_sample_seed;
      entry["stage"] = flip_stage;
      update_manifest(flip_run, flippability_tag(flip_stage, loss), entry);
    } else if (stages->parsed()) {
      stages_common.load();
      SearchConfig search = search_config_from(stages_common.config);
      Corpus corpus = load_corpus(stages_corpus);
      ensure_run_dirs(stages_run);
      LossKind loss = loss_from_string(stages_loss);
      auto two = run_flippability_stage(stages_run, corpus, loss, "two_epochs",
                                        stages_sample, stages_sample_seed,
                                        search, stages_workers);
      auto conv = run_flippability_stage(stages_run, corpus, loss, "converged",
                                         stages_sample, stages_sample_seed,
                                         search, stages_workers);
      StageComparison cmp = compare_stages(two.records, conv.records);
      write_stage_comparison_csv(
          cmp, (fs::path(stages_run) / "reports" /
                (std::string("stage_comparison_") + loss_name(loss) + ".csv"))
                   .string());
      for (const auto& row : cmp.rows)
        std::printf("%s%s: two_epochs=%ld converged=%ld overlap=%ld\n",
                    direction_kind_name(row.kind), row.plus_case ? "+" : "-",
                    row.two_epochs, row.converged, row.overlap);
      json entry = search_config_json(search);
      entry["sample"] = stages_sample;
      entry["sample_seed"] = stages_sample_seed;
      update_manifest(stages_run, std::string("stages_") + loss_name(loss), entry);
    } else if (port->parsed()) {
      port_common.load();
      SearchConfig search = search_config_from(port_common.config);
      Corpus corpus = load_corpus(port_corpus);
      ensure_run_dirs(port_run);
      LossKind loss = loss_from_string(port_loss);
      DirectionKind kind = direction_kind_from_name(port_kind);

      auto source_nets = load_stage_networks(port_run, corpus, loss, port_src);
      auto eval_nets = load_stage_networks(port_run, corpus, loss, port_eval);
      if (source_nets.empty() || eval_nets.empty())
        throw std::runtime_error("portability: missing checkpoints");

      std::vector<int> sample =
          sample_train_indices(corpus, port_sample, port_sample_seed);
      HarnessResult run =
          run_attacks(source_nets, corpus, sample, search, port_workers);
      auto evals = evaluate_portability(run, eval_nets, corpus, kind);
      std::string tag = std::string("portability_") + port_src + "_" +
                        port_eval + "_" + port_kind + "_" + loss_name(loss);
      write_portability_jsonl(
          evals, (fs::path(port_run) / "outcomes" / (tag + ".jsonl")).string());
      PortabilityMatrix matrix =
          aggregate_portability(corpus.attribute_names, evals);
      write_portability_csv(
          matrix, (fs::path(port_run) / "reports" / (tag + ".csv")).string());
      if (auto d = matrix.diagonal_mean())
        std::printf("portability diagonal mean: %.2f%%\n", *d);
      json entry = search_config_json(search);
      entry["sample"] = port_sample;
      entry["sample_seed"] = port_sample_seed;
      entry["source_stage"] = port_src;
      entry["eval_stage"] = port_eval;
      entry["kind"] = port_kind;
      update_manifest(port_run, tag, entry);
    } else if (lc->parsed()) {
      lc_common.load();
      TrainConfig tcfg = train_config_from(lc_common.config);
      SearchConfig search = search_config_from(lc_common.config);
      Corpus corpus = load_corpus(lc_corpus);
      ensure_run_dirs(lc_run);
      LossComparison cmp = run_loss_comparison(corpus, tcfg, search, lc_sample,
                                               lc_sample_seed, lc_workers);
      write_loss_comparison_json(
          cmp, (fs::path(lc_run) / "reports" / "loss_comparison.json").string());
      std::printf("euclidean FFA successes: %ld, softmax FFA successes: %ld\n",
                  cmp.euclidean_ffa_successes, cmp.softmax_ffa_successes);
      json entry = train_config_json(tcfg);
      entry["sample"] = lc_sample;
      entry["sample_seed"] = lc_sample_seed;
      update_manifest(lc_run, "loss_compare", entry);
    } else if (rep->parsed()) {
      regenerate_reports(rep_run);
      std::printf("reports regenerated under %s/reports\n", rep_run.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
