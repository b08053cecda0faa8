#include "attriflip/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "attriflip/rng.hpp"

namespace attriflip {

using nlohmann::json;

namespace {

// %.17g round-trips doubles exactly and keeps report bytes stable.
std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void parallel_for(std::size_t n, int workers,
                  const std::function<void(std::size_t)>& fn) {
  if (workers <= 0)
    workers = static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < workers; ++t) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

std::string to_json_line(const OutcomeRecord& r) {
  json j;
  j["image_id"] = r.image_id;
  j["attribute"] = r.attribute;
  j["kind"] = direction_kind_name(r.kind);
  j["case"] = r.plus_case ? "plus" : "minus";
  j["success"] = r.success;
  j["failure"] = failure_code_name(r.failure);
  j["flip_weight"] = r.flip_weight;
  j["pass"] = r.pass_value;
  j["class_before"] = r.class_before;
  j["class_after"] = r.class_after;
  return j.dump();
}

OutcomeRecord outcome_record_from_json(const std::string& line) {
  json j = json::parse(line);
  OutcomeRecord r;
  r.image_id = j.at("image_id").get<std::string>();
  r.attribute = j.at("attribute").get<std::string>();
  r.kind = direction_kind_from_name(j.at("kind").get<std::string>());
  r.plus_case = j.at("case").get<std::string>() == "plus";
  r.success = j.at("success").get<bool>();
  r.failure = failure_code_from_name(j.at("failure").get<std::string>());
  r.flip_weight = j.at("flip_weight").get<double>();
  r.pass_value = j.at("pass").get<double>();
  r.class_before = j.at("class_before").get<int>();
  r.class_after = j.at("class_after").get<int>();
  return r;
}

void write_outcome_jsonl(const std::vector<OutcomeRecord>& records,
                         const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path);
  for (const auto& r : records) os << to_json_line(r) << '\n';
}

std::vector<OutcomeRecord> read_outcome_jsonl(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  std::vector<OutcomeRecord> out;
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) out.push_back(outcome_record_from_json(line));
  return out;
}

std::vector<int> sample_train_indices(const Corpus& corpus, int size,
                                      std::uint64_t seed) {
  std::vector<int> train = corpus.split_indices(Split::Train);
  Rng rng(seed);
  shuffle_deterministic(train, rng);
  if (static_cast<std::size_t>(size) < train.size())
    train.resize(static_cast<std::size_t>(size));
  std::sort(train.begin(), train.end());
  return train;
}

HarnessResult run_attacks(const std::map<std::string, Network>& nets,
                          const Corpus& corpus, const std::vector<int>& sample,
                          const SearchConfig& cfg, int workers) {
  struct Task {
    const Network* net;
    int item;
    std::string attribute;
    int attr_index;
    DirectionKind kind;
  };
  std::vector<Task> tasks;
  for (const auto& name : corpus.attribute_names) {
    auto it = nets.find(name);
    if (it == nets.end()) {
      std::fprintf(stderr, "warning: no network for attribute '%s', skipping\n",
                   name.c_str());
      continue;
    }
    int attr_index = corpus.attribute_index(name);
    for (int item : sample)
      for (DirectionKind kind : {DirectionKind::FGS, DirectionKind::FFA})
        tasks.push_back({&it->second, item, name, attr_index, kind});
  }

  HarnessResult result;
  result.records.resize(tasks.size());
  result.perturbed.resize(tasks.size());

  parallel_for(tasks.size(), workers, [&](std::size_t ti) {
    const Task& task = tasks[ti];
    const CorpusItem& item = corpus.items[task.item];
    AttributeLabel truth = item.labels[task.attr_index];
    AttributeLabel predicted =
        classify(forward(*task.net, normalize(item.image)));

    AttackOutcome outcome =
        predicted == truth
            ? generate_adversarial(*task.net, item.image, truth, task.kind, cfg)
            : detect_natural_adversarial(*task.net, item.image, truth,
                                         task.kind, cfg);

    OutcomeRecord r;
    r.image_id = item.id;
    r.attribute = task.attribute;
    r.kind = task.kind;
    r.plus_case = outcome.plus_case;
    r.success = outcome.success;
    r.failure = outcome.failure;
    r.flip_weight = outcome.flip_weight;
    r.pass_value = outcome.pass.pass;
    r.class_before = outcome.class_before;
    r.class_after = outcome.class_after;
    result.records[ti] = std::move(r);
    if (outcome.success) result.perturbed[ti] = std::move(outcome.perturbed);
  });

  // Tasks were generated attribute-major, sample ascending, FGS before FFA;
  // that is already the canonical report order.
  return result;
}

FlippabilityReport aggregate_flippability(
    const std::vector<OutcomeRecord>& records) {
  FlippabilityReport report;
  for (const auto& r : records) {
    if (report.counts.find(r.attribute) == report.counts.end())
      report.attributes.push_back(r.attribute);
    AttributeCounts& c = report.counts[r.attribute];
    KindCounts& k = r.kind == DirectionKind::FGS ? c.fgs : c.ffa;
    (r.plus_case ? k.attempts_plus : k.attempts_minus)++;
    if (r.success) (r.plus_case ? k.success_plus : k.success_minus)++;
  }
  return report;
}

void write_flippability_csv(const FlippabilityReport& report,
                            const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "attribute,fgs_attempts_plus,fgs_attempts_minus,fgs_success_plus,"
        "fgs_success_minus,ffa_attempts_plus,ffa_attempts_minus,"
        "ffa_success_plus,ffa_success_minus\n";
  for (const auto& name : report.attributes) {
    const AttributeCounts& c = report.counts.at(name);
    os << name << ',' << c.fgs.attempts_plus << ',' << c.fgs.attempts_minus
       << ',' << c.fgs.success_plus << ',' << c.fgs.success_minus << ','
       << c.ffa.attempts_plus << ',' << c.ffa.attempts_minus << ','
       << c.ffa.success_plus << ',' << c.ffa.success_minus << '\n';
  }
}

StageComparison compare_stages(
    const std::vector<OutcomeRecord>& two_epoch_records,
    const std::vector<OutcomeRecord>& converged_records) {
  using Key = std::pair<std::string, std::string>;  // (attribute, image)
  auto successes = [](const std::vector<OutcomeRecord>& records,
                      DirectionKind kind, bool plus) {
    std::set<Key> keys;
    for (const auto& r : records)
      if (r.kind == kind && r.plus_case == plus && r.success)
        keys.insert({r.attribute, r.image_id});
    return keys;
  };

  StageComparison cmp;
  for (DirectionKind kind : {DirectionKind::FGS, DirectionKind::FFA}) {
    for (bool plus : {true, false}) {
      std::set<Key> a = successes(two_epoch_records, kind, plus);
      std::set<Key> b = successes(converged_records, kind, plus);
      StageRow row;
      row.kind = kind;
      row.plus_case = plus;
      row.two_epochs = static_cast<long>(a.size());
      row.converged = static_cast<long>(b.size());
      for (const auto& key : a)
        if (b.count(key) != 0) ++row.overlap;
      cmp.rows.push_back(row);
    }
  }

  // Fate of the two-epoch naturals that are no longer natural adversarials
  // after convergence: did further training classify them correctly?
  for (DirectionKind kind : {DirectionKind::FGS, DirectionKind::FFA}) {
    std::set<Key> naturals = successes(two_epoch_records, kind, false);
    std::set<Key> still = successes(converged_records, kind, false);
    std::map<Key, bool> converged_correct;
    for (const auto& r : converged_records)
      if (r.kind == kind) converged_correct[{r.attribute, r.image_id}] = r.plus_case;

    NaturalFate fate;
    fate.kind = kind;
    fate.naturals_two_epochs = static_cast<long>(naturals.size());
    for (const auto& key : naturals) {
      if (still.count(key) != 0) continue;
      ++fate.ceased;
      auto it = converged_correct.find(key);
      if (it != converged_correct.end() && it->second) ++fate.became_correct;
    }
    cmp.fates.push_back(fate);
  }
  return cmp;
}

void write_stage_comparison_csv(const StageComparison& cmp,
                                const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "kind,case,two_epochs,converged,overlap\n";
  for (const auto& row : cmp.rows)
    os << direction_kind_name(row.kind) << ','
       << (row.plus_case ? "plus" : "minus") << ',' << row.two_epochs << ','
       << row.converged << ',' << row.overlap << '\n';
  os << "kind,naturals_two_epochs,ceased,became_correct\n";
  for (const auto& fate : cmp.fates)
    os << direction_kind_name(fate.kind) << ',' << fate.naturals_two_epochs
       << ',' << fate.ceased << ',' << fate.became_correct << '\n';
}

std::string to_json_line(const PortabilityEvalRecord& r) {
  json j;
  j["source_attribute"] = r.source_attribute;
  j["image_id"] = r.image_id;
  j["kind"] = direction_kind_name(r.kind);
  j["eval_attribute"] = r.eval_attribute;
  j["flipped"] = r.flipped;
  return j.dump();
}

PortabilityEvalRecord portability_record_from_json(const std::string& line) {
  json j = json::parse(line);
  PortabilityEvalRecord r;
  r.source_attribute = j.at("source_attribute").get<std::string>();
  r.image_id = j.at("image_id").get<std::string>();
  r.kind = direction_kind_from_name(j.at("kind").get<std::string>());
  r.eval_attribute = j.at("eval_attribute").get<std::string>();
  r.flipped = j.at("flipped").get<bool>();
  return r;
}

void write_portability_jsonl(const std::vector<PortabilityEvalRecord>& records,
                             const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path);
  for (const auto& r : records) os << to_json_line(r) << '\n';
}

std::vector<PortabilityEvalRecord> read_portability_jsonl(
    const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  std::vector<PortabilityEvalRecord> out;
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) out.push_back(portability_record_from_json(line));
  return out;
}

std::vector<PortabilityEvalRecord> evaluate_portability(
    const HarnessResult& source_run,
    const std::map<std::string, Network>& eval_nets, const Corpus& corpus,
    DirectionKind kind) {
  std::map<std::string, int> id_to_item;
  for (std::size_t i = 0; i < corpus.items.size(); ++i)
    id_to_item[corpus.items[i].id] = static_cast<int>(i);

  std::vector<PortabilityEvalRecord> records;
  for (std::size_t i = 0; i < source_run.records.size(); ++i) {
    const OutcomeRecord& r = source_run.records[i];
    if (!r.success || r.kind != kind) continue;
    const Image& perturbed = source_run.perturbed[i];
    const Image& original = corpus.items[id_to_item.at(r.image_id)].image;
    Tensor pert_t = normalize(perturbed);
    Tensor orig_t = normalize(original);
    for (const auto& [eval_name, eval_net] : eval_nets) {
      AttributeLabel before = classify(forward(eval_net, orig_t));
      AttributeLabel after = classify(forward(eval_net, pert_t));
      PortabilityEvalRecord rec;
      rec.source_attribute = r.attribute;
      rec.image_id = r.image_id;
      rec.kind = kind;
      rec.eval_attribute = eval_name;
      rec.flipped = before != after;
      records.push_back(std::move(rec));
    }
  }
  return records;
}

PortabilityMatrix aggregate_portability(
    const std::vector<std::string>& attributes,
    const std::vector<PortabilityEvalRecord>& records) {
  const std::size_t n = attributes.size();
  auto index_of = [&](const std::string& name) {
    for (std::size_t i = 0; i < n; ++i)
      if (attributes[i] == name) return static_cast<int>(i);
    throw std::runtime_error("portability record names unknown attribute: " +
                             name);
  };

  std::vector<std::vector<long>> flips(n, std::vector<long>(n, 0));
  std::vector<std::set<std::string>> sources(n);
  std::vector<std::vector<long>> evals(n, std::vector<long>(n, 0));
  for (const auto& r : records) {
    int i = index_of(r.source_attribute);
    int j = index_of(r.eval_attribute);
    sources[i].insert(r.image_id);
    evals[i][j]++;
    if (r.flipped) flips[i][j]++;
  }

  PortabilityMatrix m;
  m.attributes = attributes;
  m.percent.assign(n, std::vector<double>(n, 0.0));
  m.source_counts.assign(n, 0);
  m.source_empty.assign(n, true);
  for (std::size_t i = 0; i < n; ++i) {
    m.source_counts[i] = static_cast<long>(sources[i].size());
    m.source_empty[i] = sources[i].empty();
    for (std::size_t j = 0; j < n; ++j)
      if (evals[i][j] > 0)
        m.percent[i][j] = 100.0 * static_cast<double>(flips[i][j]) /
                          static_cast<double>(evals[i][j]);
  }
  return m;
}

std::optional<double> PortabilityMatrix::diagonal_mean() const {
  double total = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < attributes.size(); ++i) {
    if (source_empty[i]) continue;
    total += percent[i][i];
    ++n;
  }
  if (n == 0) return std::nullopt;
  return total / n;
}

void write_portability_csv(const PortabilityMatrix& matrix,
                           const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "source_attribute,adversarials";
  for (const auto& name : matrix.attributes) os << ',' << name;
  os << '\n';
  for (std::size_t i = 0; i < matrix.attributes.size(); ++i) {
    os << matrix.attributes[i] << ',' << matrix.source_counts[i];
    for (std::size_t j = 0; j < matrix.attributes.size(); ++j) {
      os << ',';
      if (!matrix.source_empty[i]) os << fmt_double(matrix.percent[i][j]);
      // empty cell marks a source attribute with no adversarials
    }
    os << '\n';
  }
}

LossComparison run_loss_comparison(const Corpus& corpus,
                                   const TrainConfig& train_cfg,
                                   const SearchConfig& search_cfg,
                                   int sample_size, std::uint64_t sample_seed,
                                   int workers) {
  LossComparison cmp;
  cmp.attributes = corpus.attribute_names;

  std::vector<int> test_idx = corpus.split_indices(Split::Test);
  std::vector<int> sample =
      sample_train_indices(corpus, sample_size, sample_seed);

  std::map<std::string, Network> euclid_nets, softmax_nets;
  for (std::size_t a = 0; a < corpus.attribute_names.size(); ++a) {
    const std::string& name = corpus.attribute_names[a];
    TrainConfig cfg = train_cfg;
    cfg.seed = mix_seed(train_cfg.seed, a);
    euclid_nets.emplace(
        name, train_attribute(corpus, static_cast<int>(a), LossKind::Euclidean,
                              cfg)
                  .converged);
    softmax_nets.emplace(
        name,
        train_attribute(corpus, static_cast<int>(a), LossKind::Softmax, cfg)
            .converged);

    auto test_error = [&](const Network& net) {
      std::vector<std::pair<const Image*, AttributeLabel>> ds;
      for (int i : test_idx)
        ds.emplace_back(&corpus.items[i].image,
                        corpus.items[i].labels[a]);
      return classification_error(net, ds);
    };
    cmp.euclidean_test_errors.push_back(test_error(euclid_nets.at(name)));
    cmp.softmax_test_errors.push_back(test_error(softmax_nets.at(name)));
  }

  cmp.error_t_test =
      paired_t_test(cmp.euclidean_test_errors, cmp.softmax_test_errors);

  auto totals = [&](const std::map<std::string, Network>& nets, long& fgs,
                    long& ffa) {
    HarnessResult run = run_attacks(nets, corpus, sample, search_cfg, workers);
    for (const auto& r : run.records) {
      if (!r.success) continue;
      (r.kind == DirectionKind::FGS ? fgs : ffa)++;
    }
  };
  totals(euclid_nets, cmp.euclidean_fgs_successes, cmp.euclidean_ffa_successes);
  totals(softmax_nets, cmp.softmax_fgs_successes, cmp.softmax_ffa_successes);
  return cmp;
}

void write_loss_comparison_json(const LossComparison& cmp,
                                const std::string& path) {
  json j;
  j["attributes"] = cmp.attributes;
  j["euclidean_test_errors"] = cmp.euclidean_test_errors;
  j["softmax_test_errors"] = cmp.softmax_test_errors;
  j["t_test"] = {{"t", cmp.error_t_test.t},
                 {"p", cmp.error_t_test.p},
                 {"degenerate", cmp.error_t_test.degenerate},
                 {"note", cmp.error_t_test.note}};
  j["euclidean_fgs_successes"] = cmp.euclidean_fgs_successes;
  j["euclidean_ffa_successes"] = cmp.euclidean_ffa_successes;
  j["softmax_fgs_successes"] = cmp.softmax_fgs_successes;
  j["softmax_ffa_successes"] = cmp.softmax_ffa_successes;
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << j.dump(2) << '\n';
}

}  // namespace attriflip
