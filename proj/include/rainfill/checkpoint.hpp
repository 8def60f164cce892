#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rainfill/config.hpp"
#include "rainfill/optim.hpp"
#include "rainfill/unet.hpp"

namespace rainfill {

inline constexpr int kCheckpointVersion = 1;

/// Live weights, their EMA shadow and the optimizer moments, stored as
/// named float64 arrays in the grid container with the run config inline.
struct Checkpoint {
    RunConfig config;
    int epoch = 0;
    int64_t step = 0;
    std::vector<std::string> names;
    std::vector<std::vector<double>> live;
    std::vector<std::vector<double>> ema;
    std::vector<std::vector<double>> adam_m;
    std::vector<std::vector<double>> adam_v;
    std::vector<double> loss_history;  // mean loss per finished epoch

    static Checkpoint capture(const RunConfig& config, const UNet& net, const AdamState& adam, const EmaState& ema,
                              int epoch, std::vector<double> loss_history);
    /// Copies the live (or EMA) weights into `net`; throws DataError on a
    /// name or shape mismatch.
    void load_into(UNet& net, bool use_ema) const;
    void restore(UNet& net, AdamState& adam, EmaState& ema) const;
};

void write_checkpoint(const std::filesystem::path& base, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& base);

}  // namespace rainfill
