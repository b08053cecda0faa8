#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "attriflip/attack.hpp"
#include "attriflip/datagen.hpp"
#include "attriflip/nn.hpp"
#include "attriflip/stats.hpp"
#include "attriflip/train.hpp"

namespace attriflip {

// One attack attempt, as persisted to outcomes/*.jsonl. Reports are pure
// functions of these records.
struct OutcomeRecord {
  std::string image_id;
  std::string attribute;
  DirectionKind kind = DirectionKind::FGS;
  bool plus_case = true;
  bool success = false;
  FailureCode failure = FailureCode::None;
  double flip_weight = 0.0;
  double pass_value = 0.0;
  AttributeLabel class_before = -1;
  AttributeLabel class_after = -1;

  bool operator==(const OutcomeRecord&) const = default;
};

std::string to_json_line(const OutcomeRecord& r);
OutcomeRecord outcome_record_from_json(const std::string& line);
void write_outcome_jsonl(const std::vector<OutcomeRecord>& records,
                         const std::string& path);
std::vector<OutcomeRecord> read_outcome_jsonl(const std::string& path);

// Deterministic sample of train-split item indices.
std::vector<int> sample_train_indices(const Corpus& corpus, int size,
                                      std::uint64_t seed);

struct HarnessResult {
  std::vector<OutcomeRecord> records;  // sorted (attribute, image, kind)
  std::vector<Image> perturbed;        // parallel to records; empty on failure
};

// Runs FGS and FFA against every sampled image for every attribute that has
// a network; a missing network skips the attribute with a warning. Attacks
// fan out over `workers` threads; results are slot-assigned so aggregation
// is order-independent.
HarnessResult run_attacks(const std::map<std::string, Network>& nets,
                          const Corpus& corpus, const std::vector<int>& sample,
                          const SearchConfig& cfg, int workers = 0);

struct KindCounts {
  long attempts_plus = 0, attempts_minus = 0;
  long success_plus = 0, success_minus = 0;
};

struct AttributeCounts {
  KindCounts fgs, ffa;
};

struct FlippabilityReport {
  std::vector<std::string> attributes;
  std::map<std::string, AttributeCounts> counts;
};

FlippabilityReport aggregate_flippability(
    const std::vector<OutcomeRecord>& records);
void write_flippability_csv(const FlippabilityReport& report,
                            const std::string& path);

struct StageRow {
  DirectionKind kind;
  bool plus_case;
  long two_epochs = 0, converged = 0, overlap = 0;
};

// Fate of natural adversarials that ceased being natural at convergence.
struct NaturalFate {
  DirectionKind kind;
  long naturals_two_epochs = 0;
  long ceased = 0;
  long became_correct = 0;
};

struct StageComparison {
  std::vector<StageRow> rows;   // FGS+, FGS-, FFA+, FFA-
  std::vector<NaturalFate> fates;  // per kind
};

StageComparison compare_stages(
    const std::vector<OutcomeRecord>& two_epoch_records,
    const std::vector<OutcomeRecord>& converged_records);
void write_stage_comparison_csv(const StageComparison& cmp,
                                const std::string& path);

// One evaluation of a source adversarial image against another attribute's
// network; persisted so the portability matrix can be rebuilt from disk.
struct PortabilityEvalRecord {
  std::string source_attribute;
  std::string image_id;
  DirectionKind kind = DirectionKind::FFA;
  std::string eval_attribute;
  bool flipped = false;

  bool operator==(const PortabilityEvalRecord&) const = default;
};

std::string to_json_line(const PortabilityEvalRecord& r);
PortabilityEvalRecord portability_record_from_json(const std::string& line);
void write_portability_jsonl(const std::vector<PortabilityEvalRecord>& records,
                             const std::string& path);
std::vector<PortabilityEvalRecord> read_portability_jsonl(
    const std::string& path);

// Evaluates each successful adversarial of `kind` from the source run on
// every evaluation network. "Flip" means the evaluation network labels the
// perturbed image differently from the unperturbed one.
std::vector<PortabilityEvalRecord> evaluate_portability(
    const HarnessResult& source_run,
    const std::map<std::string, Network>& eval_nets, const Corpus& corpus,
    DirectionKind kind);

struct PortabilityMatrix {
  std::vector<std::string> attributes;
  std::vector<std::vector<double>> percent;  // [source][eval]
  std::vector<long> source_counts;           // successful adversarials per row
  std::vector<bool> source_empty;            // no adversarials generated

  std::optional<double> diagonal_mean() const;
};

PortabilityMatrix aggregate_portability(
    const std::vector<std::string>& attributes,
    const std::vector<PortabilityEvalRecord>& records);
void write_portability_csv(const PortabilityMatrix& matrix,
                           const std::string& path);

struct LossComparison {
  std::vector<std::string> attributes;
  std::vector<double> euclidean_test_errors;
  std::vector<double> softmax_test_errors;
  TTestResult error_t_test;
  long euclidean_ffa_successes = 0;
  long softmax_ffa_successes = 0;
  long euclidean_fgs_successes = 0;
  long softmax_fgs_successes = 0;
};

LossComparison run_loss_comparison(const Corpus& corpus,
                                   const TrainConfig& train_cfg,
                                   const SearchConfig& search_cfg,
                                   int sample_size, std::uint64_t sample_seed,
                                   int workers = 0);
void write_loss_comparison_json(const LossComparison& cmp,
                                const std::string& path);

}  // namespace attriflip
