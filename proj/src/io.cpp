#include "tomo/io.hpp"

#include <bit>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace tomo {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "raw volume files are little-endian; big-endian hosts need byte swaps");

namespace {

std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_raw(const std::string& path, const std::vector<double>& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!out) throw IoError("short write: " + path);
}

std::vector<double> read_raw(const std::string& path, size_t count) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::vector<double> data(count);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(count * sizeof(double)));
    if (static_cast<size_t>(in.gcount()) != count * sizeof(double))
        throw IoError("short read: " + path);
    return data;
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw IoError("invalid JSON in " + path + ": " + e.what());
    }
    return j;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << text;
    if (!out) throw IoError("short write: " + path);
}

}  // namespace

uint64_t fnv1a_hash(const std::string& text) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

void write_volume(const std::string& base, const Volume& v) {
    write_raw(base + ".raw", v.data);
    json j;
    j["type"] = "volume";
    j["shape"] = {v.nx(), v.ny(), v.nz()};
    j["spacing"] = {1.0, 1.0, 1.0};
    j["order"] = "x-fastest";
    j["dtype"] = "float64-le";
    write_text(base + ".json", j.dump(2) + "\n");
}

Volume read_volume(const std::string& base) {
    const json j = read_json_file(base + ".json");
    if (j.value("type", "") != "volume") throw IoError(base + ".json: not a volume sidecar");
    const auto shape = j.at("shape");
    Volume v(shape.at(0).get<int>(), shape.at(1).get<int>(), shape.at(2).get<int>());
    v.data = read_raw(base + ".raw", static_cast<size_t>(v.size()));
    return v;
}

void write_projections(const std::string& base, const ProjectionStack& p) {
    write_raw(base + ".raw", p.data);
    json j;
    j["type"] = "projections";
    j["n_proj"] = p.n_proj;
    j["shape"] = {p.px, p.py};
    j["order"] = "x-fastest";
    j["dtype"] = "float64-le";
    json angles = json::array();
    for (double a : p.nominal_angles) angles.push_back(a * 180.0 / M_PI);
    j["angles_deg"] = angles;
    if (p.roi) {
        j["roi"] = {{"x0", p.roi->x0}, {"y0", p.roi->y0}, {"px", p.roi->px}, {"py", p.roi->py}};
    } else {
        j["roi"] = nullptr;
    }
    write_text(base + ".json", j.dump(2) + "\n");
}

ProjectionStack read_projections(const std::string& base) {
    const json j = read_json_file(base + ".json");
    if (j.value("type", "") != "projections") throw IoError(base + ".json: not a projections sidecar");
    const auto shape = j.at("shape");
    ProjectionStack p(j.at("n_proj").get<int>(), shape.at(0).get<int>(), shape.at(1).get<int>());
    p.nominal_angles.clear();
    for (const auto& a : j.at("angles_deg")) p.nominal_angles.push_back(a.get<double>() * M_PI / 180.0);
    if (static_cast<int>(p.nominal_angles.size()) != p.n_proj)
        throw IoError(base + ".json: angle count does not match n_proj");
    if (!j.at("roi").is_null()) {
        const auto& r = j.at("roi");
        p.roi = Roi{r.at("x0").get<int>(), r.at("y0").get<int>(), r.at("px").get<int>(),
                    r.at("py").get<int>()};
    }
    p.data = read_raw(base + ".raw", static_cast<size_t>(p.size()));
    return p;
}

void write_align_csv(const std::string& path, const AlignStack& est, const AlignStack* truth) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "index,nominal_angle_rad,sx,sy,sz,theta_xy,theta_yz,theta_zx";
    if (truth) out << ",true_sx,true_sy,true_sz,true_theta_xy,true_theta_yz,true_theta_zx";
    out << "\n";
    for (int i = 0; i < est.n_proj(); ++i) {
        out << i << "," << format_g17(est.nominal_angles[i]);
        for (double v : est.params[i].to_array()) out << "," << format_g17(v);
        if (truth)
            for (double v : truth->params[i].to_array()) out << "," << format_g17(v);
        out << "\n";
    }
    if (!out) throw IoError("short write: " + path);
}

AlignStack read_align_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty file: " + path);
    AlignStack s;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(ss, cell, ',')) vals.push_back(std::strtod(cell.c_str(), nullptr));
        if (vals.size() < 8) throw IoError("malformed row in " + path);
        s.nominal_angles.push_back(vals[1]);
        Vec6 v;
        for (int j = 0; j < 6; ++j) v[j] = vals[2 + j];
        s.params.push_back(AlignParams::from_array(v));
    }
    return s;
}

namespace {

const char* kMetricsHeader =
    "iter,epsilon,optimality,residual,alpha,recon_iterations,halvings,stalled,increment,"
    "recon_rel_err,shift_rms,xy_rms,yz_rms,zx_rms,weighted_rms";

}  // namespace

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << kMetricsHeader << "\n";
    for (const auto& r : rows) {
        out << r.iter << "," << format_g17(r.epsilon) << "," << format_g17(r.optimality) << ","
            << format_g17(r.residual) << "," << format_g17(r.alpha) << "," << r.recon_iterations
            << "," << r.halvings << "," << r.stalled << "," << format_g17(r.increment) << ","
            << format_g17(r.recon_rel_err) << "," << format_g17(r.shift_rms) << ","
            << format_g17(r.xy_rms) << "," << format_g17(r.yz_rms) << "," << format_g17(r.zx_rms)
            << "," << format_g17(r.weighted_rms) << "\n";
    }
    if (!out) throw IoError("short write: " + path);
}

std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty file: " + path);
    if (line != kMetricsHeader) throw IoError("unexpected metrics header in " + path);
    std::vector<MetricsRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 15) throw IoError("malformed row in " + path);
        MetricsRow r;
        r.iter = std::atoi(cells[0].c_str());
        r.epsilon = std::strtod(cells[1].c_str(), nullptr);
        r.optimality = std::strtod(cells[2].c_str(), nullptr);
        r.residual = std::strtod(cells[3].c_str(), nullptr);
        r.alpha = std::strtod(cells[4].c_str(), nullptr);
        r.recon_iterations = std::atoi(cells[5].c_str());
        r.halvings = std::atoi(cells[6].c_str());
        r.stalled = std::atoi(cells[7].c_str());
        r.increment = std::strtod(cells[8].c_str(), nullptr);
        r.recon_rel_err = std::strtod(cells[9].c_str(), nullptr);
        r.shift_rms = std::strtod(cells[10].c_str(), nullptr);
        r.xy_rms = std::strtod(cells[11].c_str(), nullptr);
        r.yz_rms = std::strtod(cells[12].c_str(), nullptr);
        r.zx_rms = std::strtod(cells[13].c_str(), nullptr);
        r.weighted_rms = std::strtod(cells[14].c_str(), nullptr);
        rows.push_back(r);
    }
    return rows;
}

namespace {

json row_to_json(const MetricsRow& r) {
    return json{{"iter", r.iter},
                {"epsilon", r.epsilon},
                {"optimality", r.optimality},
                {"residual", r.residual},
                {"alpha", r.alpha},
                {"recon_iterations", r.recon_iterations},
                {"halvings", r.halvings},
                {"stalled", r.stalled},
                {"increment", r.increment},
                {"recon_rel_err", r.recon_rel_err},
                {"shift_rms", r.shift_rms},
                {"xy_rms", r.xy_rms},
                {"yz_rms", r.yz_rms},
                {"zx_rms", r.zx_rms},
                {"weighted_rms", r.weighted_rms}};
}

MetricsRow row_from_json(const json& j) {
    MetricsRow r;
    r.iter = j.at("iter").get<int>();
    r.epsilon = j.at("epsilon").get<double>();
    r.optimality = j.at("optimality").get<double>();
    r.residual = j.at("residual").get<double>();
    r.alpha = j.at("alpha").get<double>();
    r.recon_iterations = j.at("recon_iterations").get<int>();
    r.halvings = j.at("halvings").get<int>();
    r.stalled = j.at("stalled").get<int>();
    r.increment = j.at("increment").get<double>();
    r.recon_rel_err = j.at("recon_rel_err").get<double>();
    r.shift_rms = j.at("shift_rms").get<double>();
    r.xy_rms = j.at("xy_rms").get<double>();
    r.yz_rms = j.at("yz_rms").get<double>();
    r.zx_rms = j.at("zx_rms").get<double>();
    r.weighted_rms = j.at("weighted_rms").get<double>();
    return r;
}

}  // namespace

void write_report_json(const std::string& path, const RunReport& report,
                       const std::string& config_json) {
    json j;
    j["type"] = "run_report";
    json rows = json::array();
    for (const auto& r : report.rows) rows.push_back(row_to_json(r));
    j["rows"] = rows;
    json align = json::array();
    for (int i = 0; i < report.final_align.n_proj(); ++i) {
        const Vec6 v = report.final_align.params[i].to_array();
        align.push_back(json{{"index", i},
                             {"nominal_angle_rad", report.final_align.nominal_angles[i]},
                             {"params", std::vector<double>(v.begin(), v.end())}});
    }
    j["final_align"] = align;
    j["stopped_by_increment"] = report.stopped_by_increment;
    j["aborted"] = report.aborted;
    j["abort_reason"] = report.abort_reason;
    if (!config_json.empty()) j["config"] = json::parse(config_json);
    write_text(path, j.dump(2) + "\n");
}

LoadedReport read_report_json(const std::string& path) {
    const json j = read_json_file(path);
    if (j.value("type", "") != "run_report") throw IoError(path + ": not a run report");
    LoadedReport out;
    for (const auto& r : j.at("rows")) out.rows.push_back(row_from_json(r));
    for (const auto& a : j.at("final_align")) {
        out.final_align.nominal_angles.push_back(a.at("nominal_angle_rad").get<double>());
        const auto& pv = a.at("params");
        Vec6 v;
        for (int k = 0; k < 6; ++k) v[k] = pv.at(k).get<double>();
        out.final_align.params.push_back(AlignParams::from_array(v));
    }
    out.stopped_by_increment = j.value("stopped_by_increment", false);
    out.aborted = j.value("aborted", false);
    out.abort_reason = j.value("abort_reason", "");
    if (j.contains("config")) out.config_json = j.at("config").dump(2);
    return out;
}

void write_manifest(const std::string& path, const std::string& config_json) {
    json j;
    j["tool"] = "tomoalign";
    j["version"] = "0.1.0";
    j["config"] = json::parse(config_json);
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016" PRIx64, fnv1a_hash(config_json));
    j["config_hash_fnv1a"] = hash;
    write_text(path, j.dump(2) + "\n");
}

}  // namespace tomo
