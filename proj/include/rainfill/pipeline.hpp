#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rainfill/checkpoint.hpp"
#include "rainfill/config.hpp"
#include "rainfill/gridfile.hpp"
#include "rainfill/metrics.hpp"
#include "rainfill/synthgen.hpp"

namespace rainfill {

namespace fs = std::filesystem;

/// One window on disk: truth (if known), observation mask and auxiliaries.
struct Window {
    std::string name;
    std::optional<FieldVolume> truth;
    MaskVolume observed;
    FieldVolume masked;
    AuxiliaryFields aux;

    ConditionTensor condition() const;
};

GridFile window_to_grid(const SynthSequence& s, uint64_t seed);
Window window_from_grid(const GridFile& file, std::string name);
/// Sorted `*.hdr` bases of a directory.
std::vector<fs::path> list_grid_files(const fs::path& dir);
std::vector<Window> load_windows(const fs::path& dir);

/// Writes `<out>/train` and `<out>/eval` with disjoint sequence indices.
void cmd_gen_data(const RunConfig& cfg, const fs::path& out);

struct TrainOptions {
    std::optional<fs::path> resume;
    /// Called once per finished epoch with (epoch index, mean loss).
    std::function<void(int, double)> on_epoch;
};

/// Trains from a directory of windows, writing `ckpt` after every epoch.
/// Returns the final checkpoint.
Checkpoint cmd_train(const RunConfig& cfg, const fs::path& data_dir, const fs::path& ckpt,
                     const TrainOptions& options = {});

/// Builds a network from a checkpoint's config and its EMA weights.
UNet model_from_checkpoint(const Checkpoint& ckpt);

/// Fills one window `members` times. Member k uses seed (sample_seed, k).
std::vector<FieldVolume> sample_members(const RunConfig& cfg, Denoiser& net, const Window& w, const ConditionTensor& cond,
                                        int members);
FieldVolume ensemble_mean(const std::vector<FieldVolume>& members);

/// Channels member_00 .. member_{K-1} and mean.
void cmd_sample(const RunConfig& cfg, const Checkpoint& ckpt, const fs::path& input, int members,
                const fs::path& out);

/// Method `tli` or `tli-lf`; the output holds one `prediction` channel.
void cmd_baseline(const fs::path& input, const std::string& method, const fs::path& out);

inline constexpr int kReportSchemaVersion = 1;

/// Prediction files carry a `mean` or `prediction` channel; truth files are
/// windows with a `truth` channel. Pairs are matched by position.
MetricReport cmd_evaluate(const std::vector<fs::path>& preds, const std::vector<fs::path>& truths);

/// JSON lines: one `window` record each, then one `summary` record.
void write_report(std::ostream& out, const MetricReport& report);
MetricReport parse_report(std::istream& in);

struct AblationResult {
    SensitivityMeans full;
    std::vector<std::pair<ConditionGroup, SensitivityMeans>> ablated;
    SensitivityTable table;
};

/// Re-samples every window with each condition group forced to kMissing.
AblationResult ablate_windows(const RunConfig& cfg, Denoiser& net, const std::vector<Window>& windows, int members);
AblationResult cmd_ablate(const RunConfig& cfg, const Checkpoint& ckpt, const fs::path& data_dir, int members);
void write_sensitivity(std::ostream& out, const AblationResult& result);

}  // namespace rainfill
