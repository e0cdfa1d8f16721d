#pragma once
#include <cstdint>
#include <filesystem>
#include <string>

#include "smuq/data.hpp"
#include "smuq/lstm.hpp"

namespace smuq {

/// A trained model with everything inference needs.
///
/// Text format, one record per line, values in shortest round-trip decimal:
///
///     smuq-checkpoint 1
///     hidden <H>
///     input <D>
///     dropout <p>
///     seed <training seed>
///     data_hash <16 hex digits>
///     forcing_mean <F values>     forcing_std <F values>
///     static_mean <S values>      static_std <S values>
///     target <mean> <std>
///     w_input <4H*D values, column-major>
///     w_recurrent <4H*H values, column-major>
///     bias <4H>  w_mean <H>  b_mean <1>  w_logvar <H>  b_logvar <1>
///     end
struct Checkpoint {
    static constexpr int version = 1;

    LstmParams<double> params;
    Normalizer normalizer;
    double dropout = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t data_hash = 0;  // identifies the data/split configuration the model was fitted on
};

std::string checkpoint_text(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::string_view text);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
/// Throws ErrorKind::missing_artifact if the file does not exist.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace smuq
