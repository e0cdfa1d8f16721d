#include "smuq/data.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "smuq/error.hpp"

namespace smuq {

Dataset::Dataset(std::vector<CellRecord> cells, std::vector<std::string> forcing_names,
                 std::vector<std::string> static_names, std::vector<std::string> time_labels,
                 std::string step_unit)
    : cells_(std::move(cells)),
      forcing_names_(std::move(forcing_names)),
      static_names_(std::move(static_names)),
      time_labels_(std::move(time_labels)),
      step_unit_(std::move(step_unit)) {
    const Index T = n_steps();
    std::set<std::string> ids;
    for (const auto& c : cells_) {
        if (!ids.insert(c.cell_id).second)
            throw Error(ErrorKind::schema, "duplicate cell id '" + c.cell_id + "'");
        if (c.forcings.rows() != T || c.forcings.cols() != n_forcings() ||
            c.static_attrs.size() != n_static() || c.target.size() != T || c.observed.size() != T)
            throw Error(ErrorKind::schema, "cell '" + c.cell_id + "' has inconsistent shape");
        if (!c.forcings.allFinite())
            throw Error(ErrorKind::schema, "cell '" + c.cell_id + "' has non-finite forcings");
        if (!c.static_attrs.allFinite())
            throw Error(ErrorKind::schema, "cell '" + c.cell_id + "' has non-finite static attributes");
        for (Index t = 0; t < T; ++t)
            if (c.observed(t) && !std::isfinite(c.target(t)))
                throw Error(ErrorKind::schema, "cell '" + c.cell_id + "' has a non-finite observed target");
    }
}

std::size_t Dataset::index_of(const std::string& cell_id) const {
    for (std::size_t i = 0; i < cells_.size(); ++i)
        if (cells_[i].cell_id == cell_id) return i;
    throw Error(ErrorKind::schema, "unknown cell id '" + cell_id + "'");
}

std::vector<int> Dataset::regimes() const {
    std::set<int> ids;
    for (const auto& c : cells_) ids.insert(c.regime_id);
    return {ids.begin(), ids.end()};
}

bool same_content(const Dataset& a, const Dataset& b) {
    if (a.forcing_names() != b.forcing_names() || a.static_names() != b.static_names() ||
        a.time_labels() != b.time_labels() || a.step_unit() != b.step_unit() ||
        a.n_cells() != b.n_cells())
        return false;
    for (std::size_t i = 0; i < a.n_cells(); ++i) {
        const auto& x = a.cell(i);
        const auto& y = b.cell(i);
        if (x.cell_id != y.cell_id || x.regime_id != y.regime_id || x.forcings != y.forcings ||
            x.static_attrs != y.static_attrs || (x.observed != y.observed).any())
            return false;
        for (Index t = 0; t < x.target.size(); ++t)
            if (x.observed(t) && x.target(t) != y.target(t)) return false;
    }
    return true;
}

DatasetView::DatasetView(const Dataset& data, StepRange range) : data_(&data), range_(range) {
    cells_.resize(data.n_cells());
    for (std::size_t i = 0; i < cells_.size(); ++i) cells_[i] = i;
}

DatasetView::DatasetView(const Dataset& data, StepRange range, std::vector<std::size_t> cells)
    : data_(&data), range_(range), cells_(std::move(cells)) {}

Index DatasetView::n_observed() const {
    Index n = 0;
    for (std::size_t i = 0; i < n_cells(); ++i) n += observed(i).count();
    return n;
}

SplitSpec SplitSpec::thirds(Index n_steps) {
    const Index third = n_steps / 3;
    return {{0, third}, {third, 2 * third}, {2 * third, n_steps}};
}

void SplitSpec::validate(Index n_steps) const {
    const StepRange* parts[] = {&train, &tune, &test};
    const char* names[] = {"train", "tune", "test"};
    for (int k = 0; k < 3; ++k) {
        const auto& r = *parts[k];
        if (r.empty())
            throw Error(ErrorKind::spec, std::string(names[k]) + " range is empty");
        if (r.begin < 0 || r.end > n_steps)
            throw Error(ErrorKind::spec, std::string(names[k]) + " range lies outside [0, " +
                                             std::to_string(n_steps) + ")");
    }
    if (train.end > tune.begin || tune.end > test.begin)
        throw Error(ErrorKind::spec, "split ranges overlap or are out of order");
}

SplitViews split(const Dataset& data, const SplitSpec& spec) {
    spec.validate(data.n_steps());
    return {TrainView(data, spec.train), TuneView(data, spec.tune), TestView(data, spec.test)};
}

namespace {

struct Moments {
    double mean = 0.0;
    double std = 0.0;
};

template <class Visit>
Moments population_moments(Visit&& visit) {
    double sum = 0.0;
    Index n = 0;
    visit([&](double v) { sum += v; ++n; });
    if (n == 0) return {};
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    visit([&](double v) { ss += (v - mean) * (v - mean); });
    return {mean, std::sqrt(ss / static_cast<double>(n))};
}

double floored(double s) { return std::max(s, Normalizer::std_floor); }

}  // namespace

Normalizer fit_normalizer(const DatasetView& view) {
    const Dataset& data = view.dataset();
    if (view.range().empty()) throw Error(ErrorKind::precondition, "normalizer range is empty");
    if (view.n_observed() == 0) throw Error(ErrorKind::precondition, "no training observations");

    Normalizer norm;
    norm.forcing_mean.resize(data.n_forcings());
    norm.forcing_std.resize(data.n_forcings());
    for (Index f = 0; f < data.n_forcings(); ++f) {
        auto m = population_moments([&](auto&& emit) {
            for (std::size_t i = 0; i < view.n_cells(); ++i)
                for (Index t = 0; t < view.n_steps(); ++t) emit(view.forcings(i)(t, f));
        });
        norm.forcing_mean(f) = m.mean;
        norm.forcing_std(f) = floored(m.std);
    }
    norm.static_mean.resize(data.n_static());
    norm.static_std.resize(data.n_static());
    for (Index a = 0; a < data.n_static(); ++a) {
        auto m = population_moments([&](auto&& emit) {
            for (std::size_t i = 0; i < view.n_cells(); ++i) emit(view.cell(i).static_attrs(a));
        });
        norm.static_mean(a) = m.mean;
        norm.static_std(a) = floored(m.std);
    }
    auto m = population_moments([&](auto&& emit) {
        for (std::size_t i = 0; i < view.n_cells(); ++i) {
            auto y = view.target(i);
            auto obs = view.observed(i);
            for (Index t = 0; t < view.n_steps(); ++t)
                if (obs(t)) emit(y(t));
        }
    });
    norm.target_mean = m.mean;
    norm.target_std = floored(m.std);
    return norm;
}

Normalizer fit_normalizer(const Dataset& data, StepRange range) {
    if (range.empty() || range.begin < 0 || range.end > data.n_steps())
        throw Error(ErrorKind::precondition, "normalizer range is empty or out of bounds");
    return fit_normalizer(DatasetView(data, range));
}

MatrixXd Normalizer::normalize_forcings(const Eigen::Ref<const MatrixXd>& forcings) const {
    return (forcings.rowwise() - forcing_mean.transpose()).array().rowwise() /
           forcing_std.transpose().array();
}

MatrixXd Normalizer::denormalize_forcings(const Eigen::Ref<const MatrixXd>& z) const {
    return (z.array().rowwise() * forcing_std.transpose().array()).matrix().rowwise() +
           forcing_mean.transpose();
}

VectorXd Normalizer::normalize_static(const Eigen::Ref<const VectorXd>& attrs) const {
    return (attrs - static_mean).array() / static_std.array();
}

MatrixXd Normalizer::model_input(const Eigen::Ref<const MatrixXd>& forcings,
                                 const Eigen::Ref<const VectorXd>& static_attrs) const {
    if (forcings.cols() != forcing_mean.size() || static_attrs.size() != static_mean.size())
        throw Error(ErrorKind::schema, "input width does not match the normalizer");
    MatrixXd x(forcings.rows(), n_inputs());
    x.leftCols(forcings.cols()) = normalize_forcings(forcings);
    x.rightCols(static_attrs.size()).rowwise() = normalize_static(static_attrs).transpose();
    return x;
}

}  // namespace smuq
