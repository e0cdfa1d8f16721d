#pragma once
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "smuq/types.hpp"

namespace smuq {

/// One spatial cell: forcing series, static attributes and a masked target series.
struct CellRecord {
    std::string cell_id;
    int regime_id = -1;        // synthetic provenance, -1 when unknown
    MatrixXd forcings;         // n_steps x n_forcings
    VectorXd static_attrs;     // n_static
    VectorXd target;           // n_steps, NaN allowed where !observed
    MaskVector observed;       // n_steps
};

/// Cells sharing one regular time grid. Immutable after construction.
class Dataset {
public:
    Dataset() = default;
    /// Validates shape agreement, unique ids, finite forcings and finite observed targets.
    Dataset(std::vector<CellRecord> cells, std::vector<std::string> forcing_names,
            std::vector<std::string> static_names, std::vector<std::string> time_labels,
            std::string step_unit = "step");

    std::size_t n_cells() const { return cells_.size(); }
    Index n_steps() const { return static_cast<Index>(time_labels_.size()); }
    Index n_forcings() const { return static_cast<Index>(forcing_names_.size()); }
    Index n_static() const { return static_cast<Index>(static_names_.size()); }
    /// Model input width: forcings followed by static attributes.
    Index n_inputs() const { return n_forcings() + n_static(); }

    const std::vector<CellRecord>& cells() const { return cells_; }
    const CellRecord& cell(std::size_t i) const { return cells_[i]; }
    const std::vector<std::string>& forcing_names() const { return forcing_names_; }
    const std::vector<std::string>& static_names() const { return static_names_; }
    const std::vector<std::string>& time_labels() const { return time_labels_; }
    const std::string& step_unit() const { return step_unit_; }

    /// Index of the cell with the given id; throws if absent.
    std::size_t index_of(const std::string& cell_id) const;
    /// Distinct regime ids in ascending order.
    std::vector<int> regimes() const;

private:
    std::vector<CellRecord> cells_;
    std::vector<std::string> forcing_names_;
    std::vector<std::string> static_names_;
    std::vector<std::string> time_labels_;
    std::string step_unit_ = "step";
};

/// Exact equality of structure and values; unobserved target entries are ignored.
bool same_content(const Dataset& a, const Dataset& b);

/// Non-owning window onto a subset of cells over one step interval. The referenced
/// Dataset must outlive the view.
class DatasetView {
public:
    DatasetView(const Dataset& data, StepRange range);
    DatasetView(const Dataset& data, StepRange range, std::vector<std::size_t> cells);

    const Dataset& dataset() const { return *data_; }
    StepRange range() const { return range_; }
    Index n_steps() const { return range_.size(); }
    std::size_t n_cells() const { return cells_.size(); }
    std::size_t dataset_index(std::size_t i) const { return cells_[i]; }
    const CellRecord& cell(std::size_t i) const { return data_->cell(cells_[i]); }

    auto target(std::size_t i) const { return cell(i).target.segment(range_.begin, range_.size()); }
    auto observed(std::size_t i) const { return cell(i).observed.segment(range_.begin, range_.size()); }
    auto forcings(std::size_t i) const { return cell(i).forcings.middleRows(range_.begin, range_.size()); }
    /// Forcing rows [0, range.end): the view's inputs plus all preceding inputs, for
    /// state warm-up. Never exposes targets outside the view.
    auto context_forcings(std::size_t i) const { return cell(i).forcings.topRows(range_.end); }

    /// Count of observed target entries in the view.
    Index n_observed() const;

protected:
    const Dataset* data_;
    StepRange range_;
    std::vector<std::size_t> cells_;
};

struct SplitSpec;
struct SplitViews;
SplitViews split(const Dataset& data, const SplitSpec& spec);

struct TrainPeriod {};
struct TunePeriod {};
struct TestPeriod {};

/// A view typed by the period it was cut for, so stages cannot be handed the wrong period.
template <class Period>
class PeriodView : public DatasetView {
public:
    /// Same period restricted to the given positions (indices into this view's cells).
    PeriodView subset(std::span<const std::size_t> positions) const {
        std::vector<std::size_t> picked;
        picked.reserve(positions.size());
        for (auto p : positions) picked.push_back(cells_.at(p));
        return PeriodView(*data_, range_, std::move(picked));
    }
    /// Same period restricted to cells of one regime.
    PeriodView regime(int regime_id) const {
        std::vector<std::size_t> picked;
        for (auto c : cells_)
            if (data_->cell(c).regime_id == regime_id) picked.push_back(c);
        return PeriodView(*data_, range_, std::move(picked));
    }

private:
    using DatasetView::DatasetView;
    friend SplitViews split(const Dataset& data, const SplitSpec& spec);
};

using TrainView = PeriodView<TrainPeriod>;
using TuneView = PeriodView<TunePeriod>;
using TestView = PeriodView<TestPeriod>;

/// Train, tune and test step intervals; disjoint, non-empty, increasing.
struct SplitSpec {
    StepRange train;
    StepRange tune;
    StepRange test;

    /// Three equal consecutive periods covering n_steps (remainder goes to the tail of test).
    static SplitSpec thirds(Index n_steps);
    void validate(Index n_steps) const;
};

struct SplitViews {
    TrainView train;
    TuneView tune;
    TestView test;
};

/// Per-feature standardization fitted on a designated step range.
struct Normalizer {
    static constexpr double std_floor = 1e-6;

    VectorXd forcing_mean, forcing_std;
    VectorXd static_mean, static_std;
    double target_mean = 0.0;
    double target_std = 1.0;

    double normalize_target(double y) const { return (y - target_mean) / target_std; }
    double denormalize_target(double z) const { return z * target_std + target_mean; }
    /// Converts a normalized standard deviation to physical units.
    double denormalize_sigma(double sigma) const { return sigma * target_std; }

    MatrixXd normalize_forcings(const Eigen::Ref<const MatrixXd>& forcings) const;
    MatrixXd denormalize_forcings(const Eigen::Ref<const MatrixXd>& z) const;
    VectorXd normalize_static(const Eigen::Ref<const VectorXd>& attrs) const;

    /// Normalized model input rows: forcings with the static attributes appended on every row.
    MatrixXd model_input(const Eigen::Ref<const MatrixXd>& forcings,
                         const Eigen::Ref<const VectorXd>& static_attrs) const;

    Index n_inputs() const { return forcing_mean.size() + static_mean.size(); }
};

/// Population mean/std over `range` of every cell in `data`; target statistics
/// skip unobserved entries. Throws "no training observations" if none are observed.
Normalizer fit_normalizer(const Dataset& data, StepRange range);
/// Same statistics restricted to the view's cells and interval.
Normalizer fit_normalizer(const DatasetView& view);

/// Column mapping for the long-format CSV.
struct CsvSchema {
    std::string cell_id = "cell_id";
    std::string time = "time";
    std::string target = "target";
    std::string regime = "regime";          // optional column, integer, constant per cell
    std::string static_prefix = "static:";  // remaining columns are forcings
};

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
Dataset parse_csv(std::string_view text, const CsvSchema& schema = {});
/// Long-format CSV; unobserved targets are written as empty fields.
void write_csv(const Dataset& data, const std::filesystem::path& path, const CsvSchema& schema = {});
std::string to_csv(const Dataset& data, const CsvSchema& schema = {});

}  // namespace smuq
