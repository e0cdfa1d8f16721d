#include "smuq/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "smuq/error.hpp"
#include "smuq/text.hpp"

namespace smuq {
namespace {

constexpr std::string_view magic = "smuq-checkpoint";

template <class Derived>
std::string record(std::string_view name, const Eigen::DenseBase<Derived>& values) {
    std::string line(name);
    for (Index k = 0; k < values.size(); ++k) {
        line += ' ';
        line += format_double(values.derived().reshaped()(k));
    }
    return line + '\n';
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace

std::string checkpoint_text(const Checkpoint& c) {
    const auto& p = c.params;
    const auto& n = c.normalizer;
    std::string out = std::string(magic) + ' ' + std::to_string(Checkpoint::version) + '\n';
    out += "hidden " + std::to_string(p.hidden) + '\n';
    out += "input " + std::to_string(p.input) + '\n';
    out += "dropout " + format_double(c.dropout) + '\n';
    out += "seed " + std::to_string(c.seed) + '\n';
    out += "data_hash " + hex64(c.data_hash) + '\n';
    out += record("forcing_mean", n.forcing_mean);
    out += record("forcing_std", n.forcing_std);
    out += record("static_mean", n.static_mean);
    out += record("static_std", n.static_std);
    out += record("target", VectorXd{{n.target_mean, n.target_std}});
    out += record("w_input", p.w_input);
    out += record("w_recurrent", p.w_recurrent);
    out += record("bias", p.bias);
    out += record("w_mean", p.w_mean);
    out += record("b_mean", VectorXd::Constant(1, p.b_mean));
    out += record("w_logvar", p.w_logvar);
    out += record("b_logvar", VectorXd::Constant(1, p.b_logvar));
    out += "end\n";
    return out;
}

Checkpoint parse_checkpoint(std::string_view text) {
    auto lines = split_fields(text, '\n');
    if (lines.empty()) throw Error(ErrorKind::schema, "empty checkpoint");
    const auto head = split_fields(trim(lines[0]), ' ');
    if (head.size() != 2 || head[0] != magic) throw Error(ErrorKind::schema, "not a checkpoint file");
    if (parse_int(head[1], "checkpoint version") != Checkpoint::version)
        throw Error(ErrorKind::schema, "unsupported checkpoint version " + std::string(head[1]));

    std::map<std::string, std::vector<std::string_view>, std::less<>> records;
    bool ended = false;
    for (std::size_t l = 1; l < lines.size(); ++l) {
        const auto line = trim(lines[l]);
        if (line.empty()) continue;
        if (line == "end") {
            ended = true;
            break;
        }
        auto fields = split_fields(line, ' ');
        std::string name(fields[0]);
        fields.erase(fields.begin());
        records[name] = std::move(fields);
    }
    if (!ended) throw Error(ErrorKind::schema, "truncated checkpoint");

    auto values = [&](const std::string& name, Index expected) {
        auto it = records.find(name);
        if (it == records.end()) throw Error(ErrorKind::schema, "checkpoint lacks '" + name + "'");
        if (expected >= 0 && static_cast<Index>(it->second.size()) != expected)
            throw Error(ErrorKind::schema, "checkpoint record '" + name + "' has the wrong length");
        VectorXd v(static_cast<Index>(it->second.size()));
        for (Index k = 0; k < v.size(); ++k) v(k) = parse_double(it->second[static_cast<std::size_t>(k)], "checkpoint " + name);
        return v;
    };
    auto scalar = [&](const std::string& name) -> std::string_view {
        auto it = records.find(name);
        if (it == records.end() || it->second.size() != 1) throw Error(ErrorKind::schema, "checkpoint lacks '" + name + "'");
        return it->second[0];
    };

    Checkpoint c;
    const Index H = parse_int(scalar("hidden"), "checkpoint hidden");
    const Index D = parse_int(scalar("input"), "checkpoint input");
    if (H < 1 || D < 1) throw Error(ErrorKind::schema, "checkpoint has invalid shapes");
    c.dropout = parse_double(scalar("dropout"), "checkpoint dropout");
    c.seed = static_cast<std::uint64_t>(std::stoull(std::string(scalar("seed"))));
    c.data_hash = std::stoull(std::string(scalar("data_hash")), nullptr, 16);

    auto& n = c.normalizer;
    n.forcing_mean = values("forcing_mean", -1);
    n.forcing_std = values("forcing_std", n.forcing_mean.size());
    n.static_mean = values("static_mean", -1);
    n.static_std = values("static_std", n.static_mean.size());
    const auto target = values("target", 2);
    n.target_mean = target(0);
    n.target_std = target(1);
    if (n.n_inputs() != D) throw Error(ErrorKind::schema, "checkpoint normalizer width does not match the model input");

    auto& p = c.params;
    p = LstmParams<double>::zeros(H, D);
    p.w_input.reshaped() = values("w_input", 4 * H * D);
    p.w_recurrent.reshaped() = values("w_recurrent", 4 * H * H);
    p.bias = values("bias", 4 * H);
    p.w_mean = values("w_mean", H);
    p.b_mean = values("b_mean", 1)(0);
    p.w_logvar = values("w_logvar", H);
    p.b_logvar = values("b_logvar", 1)(0);
    if (!p.all_finite()) throw Error(ErrorKind::schema, "checkpoint has non-finite weights");
    return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot write '" + path.string() + "'");
    out << checkpoint_text(ckpt);
    if (!out) throw Error(ErrorKind::io, "failed writing '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path))
        throw Error(ErrorKind::missing_artifact, "checkpoint '" + path.string() + "' does not exist");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_checkpoint(buf.str());
}

}  // namespace smuq
