#include "kdseq/prune.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace kdseq {

std::size_t PruneMask::total() const {
  std::size_t n = 0;
  for (const auto& [name, m] : retained) n += m.size();
  return n;
}

std::size_t PruneMask::retained_count() const {
  std::size_t n = 0;
  for (const auto& [name, m] : retained) n += static_cast<std::size_t>(std::count(m.begin(), m.end(), 1));
  return n;
}

std::size_t pruned_entries(std::size_t total, double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw std::invalid_argument("prune: fraction must lie in [0, 1)");
  const double exact = fraction * static_cast<double>(total);
  const double nearest = std::round(exact);
  // 0.8 * 10 evaluates to 8.000000000000002 in binary; that is 8, not 9
  if (std::abs(exact - nearest) <= 1e-9 * std::max(1.0, exact)) return static_cast<std::size_t>(nearest);
  return static_cast<std::size_t>(std::ceil(exact));
}

PruneMask compute_prune_mask(const ModelParams& params, double fraction) {
  struct Entry {
    double mag;
    std::size_t order;
    const std::string* name;
    std::size_t index;
  };
  std::vector<Entry> entries;
  PruneMask mask;
  mask.pruned_fraction = fraction;
  std::size_t order = 0;
  for (const auto& [name, t] : params) {
    mask.retained[name].assign(t.size(), 1);
    const auto v = t.values();
    for (std::size_t i = 0; i < v.size(); ++i) entries.push_back({std::abs(v[i]), order++, &name, i});
  }
  const std::size_t cut = pruned_entries(entries.size(), fraction);
  if (cut == 0) return mask;
  auto before = [](const Entry& a, const Entry& b) { return a.mag != b.mag ? a.mag < b.mag : a.order < b.order; };
  std::nth_element(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(cut - 1), entries.end(), before);
  std::sort(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(cut), before);
  for (std::size_t i = 0; i < cut; ++i) mask.retained[*entries[i].name][entries[i].index] = 0;
  mask.threshold = entries[cut - 1].mag;
  return mask;
}

void apply_mask(ModelParams& params, const PruneMask& mask) {
  if (mask.retained.size() != params.num_tensors()) throw std::invalid_argument("apply_mask: tensor sets differ");
  for (auto& [name, t] : params) {
    auto it = mask.retained.find(name);
    if (it == mask.retained.end()) throw std::invalid_argument("apply_mask: no mask for " + name);
    if (it->second.size() != t.size()) throw std::invalid_argument("apply_mask: size mismatch for " + name);
    auto v = t.mutable_values();
    for (std::size_t i = 0; i < v.size(); ++i)
      if (!it->second[i]) v[i] = 0.0;
  }
}

std::size_t zeros_under_mask(const ModelParams& params, const PruneMask& mask) {
  std::size_t n = 0;
  for (const auto& [name, t] : params) {
    const auto& m = mask.retained.at(name);
    const auto v = t.values();
    for (std::size_t i = 0; i < v.size(); ++i)
      if (!m[i] && v[i] == 0.0 && !std::signbit(v[i])) ++n;
  }
  return n;
}

RetrainResult retrain_pruned(const Seq2SeqModel& model, const PruneMask& mask, const ParallelCorpus& seq_kd_train,
                             const ParallelCorpus& seq_kd_dev, const ParallelCorpus& seq_inter_train,
                             const ParallelCorpus& seq_inter_dev, const LossFn& loss_fn, const RetrainConfig& rc,
                             const TrainConfig& base) {
  Seq2SeqModel start = model.clone();
  apply_mask(start.params, mask);
  TrainHooks hooks;
  hooks.after_update = [&mask](Seq2SeqModel& m) { apply_mask(m.params, mask); };

  FineTuneConfig first{rc.lr_seq_kd, rc.max_epochs, rc.stall_epochs};
  TrainResult a = fine_tune(start, seq_kd_train, seq_kd_dev, loss_fn, first, base, hooks);
  FineTuneConfig second{rc.lr_seq_inter, rc.max_epochs, rc.stall_epochs};
  TrainResult b = fine_tune(a.model, seq_inter_train, seq_inter_dev, loss_fn, second, base, hooks);
  Seq2SeqModel out = b.model.clone();
  return {std::move(out), std::move(a), std::move(b)};
}

std::string CompressionReport::format_count(std::size_t n) {
  char buf[32];
  if (n >= 1000000)
    std::snprintf(buf, sizeof buf, "%.0fm", static_cast<double>(n) / 1e6);
  else if (n >= 1000)
    std::snprintf(buf, sizeof buf, "%.0fk", static_cast<double>(n) / 1e3);
  else
    std::snprintf(buf, sizeof buf, "%zu", n);
  return buf;
}

std::string CompressionReport::format_ratio() const { return std::to_string(ratio_rounded) + "x"; }

std::string CompressionReport::render() const {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-10s %-10s %-8s\n%-10s %-10s %-8s\n", "Params", "Retained", "Ratio",
                format_count(params).c_str(), format_count(retained).c_str(), format_ratio().c_str());
  return buf;
}

std::string CompressionReport::to_tsv() const {
  std::ostringstream os;
  char r[32];
  std::snprintf(r, sizeof r, "%.4f", ratio);
  os << "params\t" << params << "\nretained\t" << retained << "\nteacher_params\t" << teacher_params << "\nratio\t"
     << r << "\nratio_rounded\t" << ratio_rounded << '\n';
  return os.str();
}

CompressionReport compression_report(std::size_t params, std::size_t retained, std::size_t teacher_params) {
  if (params == 0 || retained == 0 || teacher_params == 0)
    throw std::invalid_argument("compression_report: counts must be positive");
  if (retained > params) throw std::invalid_argument("compression_report: retained exceeds total");
  CompressionReport r;
  r.params = params;
  r.retained = retained;
  r.teacher_params = teacher_params;
  r.ratio = static_cast<double>(teacher_params) / static_cast<double>(retained);
  r.ratio_rounded = std::llround(r.ratio);
  return r;
}

}  // namespace kdseq
