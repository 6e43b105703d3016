#include "trajfuse/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace trajfuse::io {

using json = nlohmann::ordered_json;

bool DatasetManifest::has_model(const std::string& id) const {
    return std::find(model_ids.begin(), model_ids.end(), id) != model_ids.end();
}

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw ParseError(where + ": " + what);
}

const json& field(const json& obj, const char* name, const std::string& where) {
    const auto it = obj.find(name);
    if (it == obj.end()) fail(where, std::string("missing field '") + name + "'");
    return *it;
}

std::string string_field(const json& obj, const char* name, const std::string& where) {
    const auto& v = field(obj, name, where);
    if (!v.is_string() || v.get_ref<const std::string&>().empty()) {
        fail(where, std::string("field '") + name + "' must be a nonempty string");
    }
    return v.get<std::string>();
}

double number(const json& v, const std::string& where, const std::string& name) {
    if (!v.is_number()) fail(where, "field '" + name + "' must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(where, "field '" + name + "' is not finite");
    return d;
}

json parse_line(const std::string& line, const std::string& where) {
    try {
        auto j = json::parse(line);
        if (!j.is_object()) fail(where, "record is not a JSON object");
        return j;
    } catch (const json::exception& e) {
        fail(where, std::string("malformed JSON: ") + e.what());
    }
}

std::vector<core::Waypoint> parse_points(const json& obj, const std::string& where) {
    const auto& pts = field(obj, "points", where);
    if (!pts.is_array() || pts.empty()) fail(where, "field 'points' must be a nonempty array");
    std::vector<core::Waypoint> out;
    out.reserve(pts.size());
    for (const auto& p : pts) {
        if (!p.is_array() || p.size() != 2) fail(where, "each point must be an [x, y] pair");
        out.push_back({number(p[0], where, "points"), number(p[1], where, "points")});
    }
    return out;
}

json encode_points(const core::Trajectory& traj) {
    json pts = json::array();
    for (const auto& p : traj.points()) pts.push_back(json::array({p.x, p.y}));
    return pts;
}

core::Trajectory make_trajectory(std::vector<core::Waypoint> pts, double dt, std::size_t horizon,
                                 const std::string& where) {
    if (pts.size() != horizon) {
        throw HorizonMismatch(where + ": trajectory has " + std::to_string(pts.size()) +
                              " points, manifest horizon is " + std::to_string(horizon));
    }
    return core::Trajectory(std::move(pts), dt);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

template <typename T, typename Encode>
void write_lines(const std::filesystem::path& path, const std::vector<const T*>& items, Encode encode) {
    std::string content;
    for (const auto* item : items) {
        content += encode(*item);
        content += '\n';
    }
    write_text(path, content);
}

}  // namespace

void write_text(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    const auto where = path.string();
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        fail(where, std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) fail(where, "manifest is not a JSON object");

    DatasetManifest m;
    const auto& version = field(j, "format_version", where);
    if (!version.is_number_integer() || version.get<int>() != kFormatVersion) {
        fail(where, "field 'format_version' must be " + std::to_string(kFormatVersion));
    }
    m.dataset_name = string_field(j, "dataset_name", where);

    const auto& horizon = field(j, "horizon", where);
    if (!horizon.is_number_integer() || horizon.get<long long>() < 1) {
        fail(where, "field 'horizon' must be an integer >= 1");
    }
    m.horizon = horizon.get<std::size_t>();

    m.dt = number(field(j, "dt", where), where, "dt");
    if (m.dt <= 0.0) fail(where, "field 'dt' must be positive");

    const auto& ids = field(j, "model_ids", where);
    if (!ids.is_array()) fail(where, "field 'model_ids' must be an array");
    for (const auto& id : ids) {
        if (!id.is_string() || id.get_ref<const std::string&>().empty()) {
            fail(where, "field 'model_ids' must hold nonempty strings");
        }
        if (m.has_model(id.get<std::string>())) {
            fail(where, "field 'model_ids' has duplicate '" + id.get<std::string>() + "'");
        }
        m.model_ids.push_back(id.get<std::string>());
    }

    const auto& count = field(j, "sample_count", where);
    if (!count.is_number_integer() || count.get<long long>() < 0) {
        fail(where, "field 'sample_count' must be a nonnegative integer");
    }
    m.sample_count = count.get<std::size_t>();
    return m;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
    json j;
    j["format_version"] = m.format_version;
    j["dataset_name"] = m.dataset_name;
    j["horizon"] = m.horizon;
    j["dt"] = m.dt;
    j["model_ids"] = m.model_ids;
    j["sample_count"] = m.sample_count;
    write_text(path, j.dump(2) + "\n");
}

LineReader::LineReader(std::filesystem::path path) : path_(std::move(path)), in_(path_, std::ios::binary) {
    if (!in_) throw IoError("cannot open '" + path_.string() + "' for reading");
}

std::optional<std::string> LineReader::next() {
    std::string line;
    while (std::getline(in_, line)) {
        ++line_;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") != std::string::npos) return line;
    }
    if (in_.bad()) throw IoError("failed reading '" + path_.string() + "'");
    return std::nullopt;
}

std::string LineReader::where() const { return path_.string() + ":" + std::to_string(line_); }

PredictionReader::PredictionReader(const std::filesystem::path& path, const DatasetManifest& manifest)
    : lines_(path), manifest_(&manifest) {}

std::optional<core::ModelOutput> PredictionReader::next() {
    const auto line = lines_.next();
    if (!line) return std::nullopt;
    const auto where = lines_.where();
    const auto j = parse_line(*line, where);

    core::ModelOutput out;
    out.sample_id = string_field(j, "sample_id", where);
    out.model_id = string_field(j, "model_id", where);
    if (!manifest_->has_model(out.model_id)) fail(where, "unknown model_id '" + out.model_id + "'");

    const auto& modes = field(j, "modes", where);
    if (!modes.is_array() || modes.empty()) fail(where, "field 'modes' must be a nonempty array");
    for (const auto& mode : modes) {
        if (!mode.is_object()) fail(where, "each mode must be an object");
        const double conf = number(field(mode, "confidence", where), where, "confidence");
        if (conf < 0.0) fail(where, "field 'confidence' must be nonnegative");
        out.modes.push_back(
            {make_trajectory(parse_points(mode, where), manifest_->dt, manifest_->horizon, where), conf});
    }
    return out;
}

GroundTruthReader::GroundTruthReader(const std::filesystem::path& path, const DatasetManifest& manifest)
    : lines_(path), manifest_(&manifest) {}

std::optional<GroundTruthRecord> GroundTruthReader::next() {
    const auto line = lines_.next();
    if (!line) return std::nullopt;
    const auto where = lines_.where();
    const auto j = parse_line(*line, where);

    GroundTruthRecord rec;
    rec.sample_id = string_field(j, "sample_id", where);
    if (!seen_.insert(rec.sample_id).second) fail(where, "duplicate sample_id '" + rec.sample_id + "'");
    rec.trajectory = make_trajectory(parse_points(j, where), manifest_->dt, manifest_->horizon, where);
    return rec;
}

FusedReader::FusedReader(const std::filesystem::path& path) : lines_(path) {}

std::optional<fusion::FusedPrediction> FusedReader::next() {
    const auto line = lines_.next();
    if (!line) return std::nullopt;
    const auto where = lines_.where();
    const auto j = parse_line(*line, where);

    fusion::FusedPrediction f;
    f.sample_id = string_field(j, "sample_id", where);
    try {
        f.strategy = fusion::parse_strategy(string_field(j, "strategy", where));
    } catch (const InvalidInput& e) {
        fail(where, e.what());
    }
    const double dt = number(field(j, "dt", where), where, "dt");
    if (dt <= 0.0) fail(where, "field 'dt' must be positive");
    auto pts = parse_points(j, where);
    const auto horizon = pts.size();
    f.trajectory = make_trajectory(std::move(pts), dt, horizon, where);

    const auto& weights = field(j, "weights", where);
    if (!weights.is_array()) fail(where, "field 'weights' must be an array");
    for (const auto& w : weights) {
        if (!w.is_object()) fail(where, "each weight must be an object");
        f.weights.push_back({string_field(w, "model_id", where), number(field(w, "weight", where), where, "weight")});
    }

    const auto& cov = field(j, "covariance", where);
    if (!cov.is_array() || cov.size() != 2 || !cov[0].is_array() || cov[0].size() != 2 || !cov[1].is_array() ||
        cov[1].size() != 2) {
        fail(where, "field 'covariance' must be a 2x2 array");
    }
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 2; ++c) f.covariance.matrix(r, c) = number(cov[r][c], where, "covariance");
    }
    f.covariance.determinant = number(field(j, "determinant", where), where, "determinant");
    f.confidence = number(field(j, "confidence", where), where, "confidence");

    if (const auto it = j.find("warnings"); it != j.end()) {
        if (!it->is_array()) fail(where, "field 'warnings' must be an array");
        for (const auto& w : *it) {
            if (!w.is_string()) fail(where, "warnings must be strings");
            f.warnings.push_back(w.get<std::string>());
        }
    }
    return f;
}

std::vector<core::ModelOutput> load_predictions(const std::filesystem::path& path, const DatasetManifest& manifest) {
    PredictionReader reader(path, manifest);
    std::vector<core::ModelOutput> out;
    while (auto rec = reader.next()) out.push_back(std::move(*rec));
    return out;
}

std::vector<GroundTruthRecord> load_ground_truth(const std::filesystem::path& path, const DatasetManifest& manifest) {
    GroundTruthReader reader(path, manifest);
    std::vector<GroundTruthRecord> out;
    while (auto rec = reader.next()) out.push_back(std::move(*rec));
    return out;
}

std::vector<fusion::FusedPrediction> load_fused(const std::filesystem::path& path) {
    FusedReader reader(path);
    std::vector<fusion::FusedPrediction> out;
    while (auto rec = reader.next()) out.push_back(std::move(*rec));
    return out;
}

std::string encode_prediction(const core::ModelOutput& output) {
    json j;
    j["sample_id"] = output.sample_id;
    j["model_id"] = output.model_id;
    json modes = json::array();
    for (const auto& mode : output.modes) {
        json m;
        m["confidence"] = mode.confidence;
        m["points"] = encode_points(mode.trajectory);
        modes.push_back(m);
    }
    j["modes"] = modes;
    return j.dump();
}

std::string encode_ground_truth(const GroundTruthRecord& record) {
    json j;
    j["sample_id"] = record.sample_id;
    j["points"] = encode_points(record.trajectory);
    return j.dump();
}

std::string encode_fused(const fusion::FusedPrediction& f) {
    json j;
    j["sample_id"] = f.sample_id;
    j["strategy"] = std::string(fusion::to_string(f.strategy));
    j["dt"] = f.trajectory.dt();
    j["points"] = encode_points(f.trajectory);
    json weights = json::array();
    for (const auto& w : f.weights) {
        json e;
        e["model_id"] = w.model_id;
        e["weight"] = w.weight;
        weights.push_back(e);
    }
    j["weights"] = weights;
    const auto& c = f.covariance.matrix;
    j["covariance"] = json::array({json::array({c(0, 0), c(0, 1)}), json::array({c(1, 0), c(1, 1)})});
    j["determinant"] = f.covariance.determinant;
    j["confidence"] = f.confidence;
    j["warnings"] = f.warnings;
    return j.dump();
}

void write_predictions(const std::filesystem::path& path, std::span<const core::ModelOutput> outputs) {
    std::vector<const core::ModelOutput*> sorted;
    for (const auto& o : outputs) sorted.push_back(&o);
    std::sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
        return std::tie(a->sample_id, a->model_id) < std::tie(b->sample_id, b->model_id);
    });
    write_lines(path, sorted, encode_prediction);
}

void write_ground_truth(const std::filesystem::path& path, std::span<const GroundTruthRecord> records) {
    std::vector<const GroundTruthRecord*> sorted;
    for (const auto& r : records) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) { return a->sample_id < b->sample_id; });
    write_lines(path, sorted, encode_ground_truth);
}

void write_fused(const std::filesystem::path& path, std::span<const fusion::FusedPrediction> fused) {
    std::vector<const fusion::FusedPrediction*> sorted;
    for (const auto& f : fused) sorted.push_back(&f);
    std::sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) { return a->sample_id < b->sample_id; });
    write_lines(path, sorted, encode_fused);
}

ReportFormat parse_report_format(const std::string& name) {
    if (name == "csv") return ReportFormat::csv;
    if (name == "json") return ReportFormat::json;
    throw InvalidInput("unknown report format '" + name + "'");
}

std::string format_k(double k_percent) {
    char buf[32];
    if (k_percent == std::floor(k_percent)) {
        std::snprintf(buf, sizeof buf, "%.0f", k_percent);
    } else {
        std::snprintf(buf, sizeof buf, "%g", k_percent);
    }
    return buf;
}

namespace {

std::string fixed2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace

std::string render_summary(std::span<const metrics::SummaryRow> rows, std::span<const double> k_list,
                           ReportFormat format) {
    if (format == ReportFormat::json) {
        json doc;
        json ks = json::array();
        for (double k : k_list) ks.push_back(k);
        doc["k_list"] = ks;
        json methods = json::array();
        for (const auto& row : rows) {
            json r;
            r["method"] = row.method_id;
            json cells = json::array();
            for (const auto& cell : row.cells) {
                json c;
                c["k_percent"] = cell.k_percent;
                c["ade"] = cell.ade;
                c["fde"] = cell.fde;
                cells.push_back(c);
            }
            r["top_k"] = cells;
            r["overall_ade"] = row.overall_ade;
            r["overall_fde"] = row.overall_fde;
            methods.push_back(r);
        }
        doc["methods"] = methods;
        return doc.dump(2) + "\n";
    }

    std::string out = "method";
    for (double k : k_list) {
        const auto label = format_k(k);
        out += ",top" + label + "_ade,top" + label + "_fde";
    }
    out += ",overall_ade,overall_fde\n";
    for (const auto& row : rows) {
        out += row.method_id;
        for (const auto& cell : row.cells) out += "," + fixed2(cell.ade) + "," + fixed2(cell.fde);
        out += "," + fixed2(row.overall_ade) + "," + fixed2(row.overall_fde) + "\n";
    }
    return out;
}

std::string render_overlap(const metrics::OverlapReport& report, double k_percent, ReportFormat format) {
    const auto& ids = report.model_ids;
    if (format == ReportFormat::json) {
        json doc;
        doc["k_percent"] = k_percent;
        json models = json::array();
        for (std::size_t i = 0; i < ids.size(); ++i) {
            json m;
            m["model_id"] = ids[i];
            m["size"] = report.set_sizes[i];
            m["exclusive"] = report.exclusive[i];
            m["exclusive_pct"] = report.percent_of(i, report.exclusive[i]);
            m["common_all_pct"] = report.percent_of(i, report.common_all);
            models.push_back(m);
        }
        doc["models"] = models;
        json pairs = json::array();
        for (const auto& p : report.pairs) {
            json e;
            e["models"] = json::array({ids[p.first], ids[p.second]});
            e["count"] = p.count;
            e["pct"] = json::array({report.percent_of(p.first, p.count), report.percent_of(p.second, p.count)});
            pairs.push_back(e);
        }
        doc["pairs"] = pairs;
        json triples = json::array();
        for (const auto& t : report.triples) {
            json e;
            e["models"] = json::array({ids[t.first], ids[t.second], ids[t.third]});
            e["count"] = t.count;
            e["pct"] = json::array({report.percent_of(t.first, t.count), report.percent_of(t.second, t.count),
                                    report.percent_of(t.third, t.count)});
            triples.push_back(e);
        }
        doc["triples"] = triples;
        doc["common_all"] = report.common_all;
        doc["union_size"] = report.union_size;
        json regions = json::array();
        for (const auto& [mask, count] : report.regions) {
            json r;
            json members = json::array();
            for (std::size_t i = 0; i < ids.size(); ++i) {
                if (mask & (std::uint32_t{1} << i)) members.push_back(ids[i]);
            }
            r["members"] = members;
            r["count"] = count;
            regions.push_back(r);
        }
        doc["regions"] = regions;
        return doc.dump(2) + "\n";
    }

    // Long format: one row per quantity, one percentage column per model
    // (blank where the model is not part of the quantity).
    std::string out = "quantity,count";
    for (const auto& id : ids) out += ",pct_of_" + id;
    out += "\n";
    auto row = [&](const std::string& name, std::size_t count, const std::vector<std::size_t>& involved) {
        out += name + "," + std::to_string(count);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            out += ",";
            if (std::find(involved.begin(), involved.end(), i) != involved.end()) {
                out += fixed2(report.percent_of(i, count));
            }
        }
        out += "\n";
    };
    std::vector<std::size_t> everyone(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) everyone[i] = i;
    for (std::size_t i = 0; i < ids.size(); ++i) row("size:" + ids[i], report.set_sizes[i], {i});
    for (std::size_t i = 0; i < ids.size(); ++i) row("exclusive:" + ids[i], report.exclusive[i], {i});
    for (const auto& p : report.pairs) {
        row("pair:" + ids[p.first] + "+" + ids[p.second], p.count, {p.first, p.second});
    }
    for (const auto& t : report.triples) {
        row("triple:" + ids[t.first] + "+" + ids[t.second] + "+" + ids[t.third], t.count,
            {t.first, t.second, t.third});
    }
    row("common_all", report.common_all, everyone);
    row("union", report.union_size, {});
    return out;
}

void write_summary(const std::filesystem::path& path, std::span<const metrics::SummaryRow> rows,
                   std::span<const double> k_list, ReportFormat format) {
    write_text(path, render_summary(rows, k_list, format));
}

void write_overlap(const std::filesystem::path& path, const metrics::OverlapReport& report, double k_percent,
                   ReportFormat format) {
    write_text(path, render_overlap(report, k_percent, format));
}

}  // namespace trajfuse::io
