#include "tomo/config.hpp"

#include <fstream>
#include <json.hpp>
#include <set>

namespace tomo {

using nlohmann::json;

namespace {

constexpr double kDeg = M_PI / 180.0;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ConfigError("config: " + path + ": " + what);
}

void check_keys(const json& obj, const std::string& path, const std::set<std::string>& known) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!known.count(it.key())) fail(path + "." + it.key(), "unknown key");
}

double get_num(const json& obj, const std::string& path, const std::string& key, double dflt) {
    if (!obj.contains(key)) return dflt;
    if (!obj[key].is_number()) fail(path + "." + key, "expected a number");
    return obj[key].get<double>();
}

int get_int(const json& obj, const std::string& path, const std::string& key, int dflt) {
    if (!obj.contains(key)) return dflt;
    if (!obj[key].is_number_integer()) fail(path + "." + key, "expected an integer");
    return obj[key].get<int>();
}

bool get_bool(const json& obj, const std::string& path, const std::string& key, bool dflt) {
    if (!obj.contains(key)) return dflt;
    if (!obj[key].is_boolean()) fail(path + "." + key, "expected a boolean");
    return obj[key].get<bool>();
}

std::string get_str(const json& obj, const std::string& path, const std::string& key,
                    const std::string& dflt) {
    if (!obj.contains(key)) return dflt;
    if (!obj[key].is_string()) fail(path + "." + key, "expected a string");
    return obj[key].get<std::string>();
}

InterpScheme parse_scheme(const std::string& s, const std::string& path) {
    if (s == "trilinear") return trilinear_scheme();
    if (s == "bicubic") return bicubic_scheme();
    if (s == "bilinear") return {Kernel::linear, Decomposition::plane2d};
    if (s == "tricubic") return {Kernel::cubic, Decomposition::direct3d};
    fail(path, "expected one of trilinear|bicubic|bilinear|tricubic");
}

Vec6 parse_box(const json& obj, const std::string& path, const std::string& key, double dflt) {
    Vec6 v{dflt, dflt, dflt, dflt, dflt, dflt};
    if (!obj.contains(key)) return v;
    const json& arr = obj[key];
    if (!arr.is_array() || arr.size() != 6)
        fail(path + "." + key, "expected an array of 6 numbers (sx, sy, sz, xy_deg, yz_deg, zx_deg)");
    for (int j = 0; j < 6; ++j) {
        if (!arr[j].is_number()) fail(path + "." + key, "expected numbers");
        v[j] = arr[j].get<double>();
    }
    for (int j = 3; j < 6; ++j) v[j] *= kDeg;  // angles in files are degrees
    return v;
}

}  // namespace

std::vector<double> ExperimentConfig::angles() const {
    std::vector<double> a(angle_count);
    for (int i = 0; i < angle_count; ++i)
        a[i] = angle_start + (angle_end - angle_start) * i / angle_count;
    return a;
}

std::optional<Roi> ExperimentConfig::roi() const {
    if (!roi_enabled) return std::nullopt;
    Roi r = centered_roi(roi_px, roi_py, grid_n, grid_n);
    if (roi_x0) r.x0 = *roi_x0;
    if (roi_y0) r.y0 = *roi_y0;
    return r;
}

ExperimentConfig parse_experiment_config(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config: top level must be an object");
    check_keys(root, "",
               {"grid", "angles", "phantom", "misalign", "simulate", "roi", "recon", "driver",
                "recon_scheme", "init", "threads", "deterministic", "output"});

    ExperimentConfig cfg;

    if (root.contains("grid")) {
        const json& g = root["grid"];
        check_keys(g, "grid", {"n"});
        cfg.grid_n = get_int(g, "grid", "n", cfg.grid_n);
        if (cfg.grid_n < 2) fail("grid.n", "must be at least 2");
    }
    if (root.contains("angles")) {
        const json& a = root["angles"];
        check_keys(a, "angles", {"count", "start_deg", "end_deg"});
        cfg.angle_count = get_int(a, "angles", "count", cfg.angle_count);
        if (cfg.angle_count < 2) fail("angles.count", "must be at least 2");
        cfg.angle_start = get_num(a, "angles", "start_deg", 0.0) * kDeg;
        cfg.angle_end = get_num(a, "angles", "end_deg", 180.0) * kDeg;
        if (!(cfg.angle_end > cfg.angle_start)) fail("angles.end_deg", "must exceed start_deg");
    }
    if (root.contains("phantom")) {
        const json& p = root["phantom"];
        check_keys(p, "phantom",
                   {"n_ellipsoids", "density_min", "density_max", "support", "margin", "seed"});
        cfg.phantom.n_ellipsoids = get_int(p, "phantom", "n_ellipsoids", cfg.phantom.n_ellipsoids);
        if (cfg.phantom.n_ellipsoids < 0) fail("phantom.n_ellipsoids", "must be non-negative");
        cfg.phantom.density_min = get_num(p, "phantom", "density_min", cfg.phantom.density_min);
        cfg.phantom.density_max = get_num(p, "phantom", "density_max", cfg.phantom.density_max);
        if (cfg.phantom.density_min < 0 || cfg.phantom.density_max < cfg.phantom.density_min)
            fail("phantom.density_min", "densities must satisfy 0 <= min <= max");
        const std::string sup = get_str(p, "phantom", "support", "cylinder");
        if (sup == "cube")
            cfg.phantom.support = PhantomSpec::Support::cube;
        else if (sup == "cylinder")
            cfg.phantom.support = PhantomSpec::Support::cylinder;
        else
            fail("phantom.support", "expected cube|cylinder");
        cfg.phantom.margin = get_int(p, "phantom", "margin", cfg.phantom.margin);
        cfg.phantom.seed = static_cast<uint64_t>(get_int(p, "phantom", "seed", 1));
    }
    cfg.phantom.n = cfg.grid_n;

    if (root.contains("misalign")) {
        const json& m = root["misalign"];
        check_keys(m, "misalign",
                   {"shift", "inplane_deg", "pitch_deg", "tomo_deg", "systematic", "random", "seed"});
        cfg.misalign.shift_scale = get_num(m, "misalign", "shift", cfg.misalign.shift_scale);
        cfg.misalign.inplane_scale = get_num(m, "misalign", "inplane_deg", 1.0) * kDeg;
        cfg.misalign.pitch_scale = get_num(m, "misalign", "pitch_deg", 1.0) * kDeg;
        cfg.misalign.tomo_scale = get_num(m, "misalign", "tomo_deg", 0.5) * kDeg;
        cfg.misalign.systematic = get_num(m, "misalign", "systematic", cfg.misalign.systematic);
        cfg.misalign.random = get_num(m, "misalign", "random", cfg.misalign.random);
        cfg.misalign.seed = static_cast<uint64_t>(get_int(m, "misalign", "seed", 2));
    }
    if (root.contains("simulate")) {
        const json& s = root["simulate"];
        check_keys(s, "simulate", {"scheme", "noise_sigma", "seed"});
        cfg.sim_scheme = parse_scheme(get_str(s, "simulate", "scheme", "trilinear"), "simulate.scheme");
        cfg.noise_sigma = get_num(s, "simulate", "noise_sigma", 0.0);
        if (cfg.noise_sigma < 0) fail("simulate.noise_sigma", "must be non-negative");
        cfg.noise_seed = static_cast<uint64_t>(get_int(s, "simulate", "seed", 3));
    }
    if (root.contains("roi")) {
        const json& r = root["roi"];
        check_keys(r, "roi", {"enabled", "px", "py", "x0", "y0"});
        cfg.roi_enabled = get_bool(r, "roi", "enabled", false);
        cfg.roi_px = get_int(r, "roi", "px", cfg.grid_n);
        cfg.roi_py = get_int(r, "roi", "py", cfg.grid_n);
        if (r.contains("x0")) cfg.roi_x0 = get_int(r, "roi", "x0", 0);
        if (r.contains("y0")) cfg.roi_y0 = get_int(r, "roi", "y0", 0);
        if (cfg.roi_enabled &&
            (cfg.roi_px < 1 || cfg.roi_py < 1 || cfg.roi_px > cfg.grid_n || cfg.roi_py > cfg.grid_n))
            fail("roi.px", "window must fit the detector");
    }
    if (root.contains("recon")) {
        const json& r = root["recon"];
        check_keys(r, "recon",
                   {"method", "alpha", "alpha_delta", "epsilon", "max_iter", "nonneg", "inner_iter",
                    "warm_start"});
        const std::string method = get_str(r, "recon", "method", "cg");
        if (method == "cg")
            cfg.recon.method = ReconConfig::Method::cg;
        else if (method == "kaczmarz")
            cfg.recon.method = ReconConfig::Method::kaczmarz;
        else
            fail("recon.method", "expected cg|kaczmarz");
        if (r.contains("alpha") && r.contains("alpha_delta"))
            fail("recon.alpha", "alpha and alpha_delta are mutually exclusive");
        if (r.contains("alpha_delta")) {
            cfg.alpha_delta = get_num(r, "recon", "alpha_delta", 2.0);
            if (!(*cfg.alpha_delta > 0)) fail("recon.alpha_delta", "must be positive");
        } else {
            cfg.recon.alpha = get_num(r, "recon", "alpha", 30.0);
            if (!(cfg.recon.alpha > 0)) fail("recon.alpha", "must be positive");
        }
        cfg.recon.epsilon = get_num(r, "recon", "epsilon", cfg.recon.epsilon);
        if (!(cfg.recon.epsilon > 0 && cfg.recon.epsilon <= 1))
            fail("recon.epsilon", "must lie in (0, 1]");
        cfg.recon.max_iter = get_int(r, "recon", "max_iter", cfg.recon.max_iter);
        if (cfg.recon.max_iter < 1) fail("recon.max_iter", "must be positive");
        cfg.recon.nonneg = get_bool(r, "recon", "nonneg", cfg.recon.nonneg);
        cfg.recon.inner_iter = get_int(r, "recon", "inner_iter", cfg.recon.inner_iter);
        if (cfg.recon.inner_iter < 1) fail("recon.inner_iter", "must be at least 1");
        cfg.recon.warm_start = get_bool(r, "recon", "warm_start", cfg.recon.warm_start);
    }
    if (root.contains("driver")) {
        const json& d = root["driver"];
        check_keys(d, "driver",
                   {"algorithm", "n_align", "schedule", "eps_rate", "max_outer", "stop_increment",
                    "tether_lambda", "fit_tomo_angle", "mode_removal", "weight_support", "box_lo",
                    "box_hi"});
        const std::string alg = get_str(d, "driver", "algorithm", "smooth");
        if (alg == "smooth")
            cfg.driver.algorithm = DriverConfig::Algorithm::smooth;
        else if (alg == "prox")
            cfg.driver.algorithm = DriverConfig::Algorithm::prox;
        else if (alg == "alternating")
            cfg.driver.algorithm = DriverConfig::Algorithm::alternating;
        else
            fail("driver.algorithm", "expected smooth|prox|alternating");
        cfg.driver.n_align = get_int(d, "driver", "n_align", cfg.driver.n_align);
        if (cfg.driver.n_align < 1) fail("driver.n_align", "must be at least 1");
        const std::string sched = get_str(d, "driver", "schedule", "fixed");
        if (sched == "fixed")
            cfg.driver.epsilon_schedule.type = EpsilonSchedule::Type::fixed;
        else if (sched == "geometric")
            cfg.driver.epsilon_schedule.type = EpsilonSchedule::Type::geometric;
        else
            fail("driver.schedule", "expected fixed|geometric");
        cfg.driver.epsilon_schedule.rate = get_num(d, "driver", "eps_rate", 0.5);
        if (!(cfg.driver.epsilon_schedule.rate > 0 && cfg.driver.epsilon_schedule.rate <= 1))
            fail("driver.eps_rate", "must lie in (0, 1]");
        cfg.driver.max_outer = get_int(d, "driver", "max_outer", cfg.driver.max_outer);
        if (cfg.driver.max_outer < 1) fail("driver.max_outer", "must be positive");
        cfg.driver.stop_increment = get_num(d, "driver", "stop_increment", cfg.driver.stop_increment);
        if (!(cfg.driver.stop_increment > 0)) fail("driver.stop_increment", "must be positive");
        cfg.driver.tether_lambda = get_num(d, "driver", "tether_lambda", 0.0);
        cfg.driver.fit_tomo_angle = get_bool(d, "driver", "fit_tomo_angle", true);
        const std::string mr = get_str(d, "driver", "mode_removal", "metrics");
        if (mr == "metrics")
            cfg.driver.mode_removal = DriverConfig::ModeRemoval::metrics_only;
        else if (mr == "iterates")
            cfg.driver.mode_removal = DriverConfig::ModeRemoval::iterates;
        else
            fail("driver.mode_removal", "expected metrics|iterates");
        const std::string ws = get_str(d, "driver", "weight_support", "cube");
        if (ws == "cube")
            cfg.driver.weight_support = PhantomSpec::Support::cube;
        else if (ws == "cylinder")
            cfg.driver.weight_support = PhantomSpec::Support::cylinder;
        else
            fail("driver.weight_support", "expected cube|cylinder");
        cfg.driver.box_lo = parse_box(d, "driver", "box_lo", -1e30);
        cfg.driver.box_hi = parse_box(d, "driver", "box_hi", 1e30);
    }
    cfg.recon_scheme = parse_scheme(get_str(root, "", "recon_scheme", "bicubic"), "recon_scheme");
    cfg.driver.scheme = cfg.recon_scheme;
    cfg.driver.recon = cfg.recon;
    cfg.driver.epsilon_schedule.eps0 = cfg.recon.epsilon;

    const std::string init = get_str(root, "", "init", "zero");
    if (init == "zero")
        cfg.init = ExperimentConfig::Init::zero;
    else if (init == "com")
        cfg.init = ExperimentConfig::Init::com;
    else
        fail("init", "expected zero|com");

    cfg.threads = get_int(root, "", "threads", 0);
    cfg.deterministic = get_bool(root, "", "deterministic", true);
    if (root.contains("output")) {
        const json& o = root["output"];
        check_keys(o, "output", {"save_volume", "save_projections", "save_truth"});
        cfg.save_volume = get_bool(o, "output", "save_volume", cfg.save_volume);
        cfg.save_projections = get_bool(o, "output", "save_projections", cfg.save_projections);
        cfg.save_truth = get_bool(o, "output", "save_truth", cfg.save_truth);
    }
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_experiment_config(text);
}

std::string experiment_config_json(const ExperimentConfig& cfg) {
    json j;
    j["grid"]["n"] = cfg.grid_n;
    j["angles"] = {{"count", cfg.angle_count},
                   {"start_deg", cfg.angle_start / kDeg},
                   {"end_deg", cfg.angle_end / kDeg}};
    j["phantom"] = {{"n_ellipsoids", cfg.phantom.n_ellipsoids},
                    {"density_min", cfg.phantom.density_min},
                    {"density_max", cfg.phantom.density_max},
                    {"support", cfg.phantom.support == PhantomSpec::Support::cube ? "cube" : "cylinder"},
                    {"margin", cfg.phantom.margin},
                    {"seed", cfg.phantom.seed}};
    j["misalign"] = {{"shift", cfg.misalign.shift_scale},
                     {"inplane_deg", cfg.misalign.inplane_scale / kDeg},
                     {"pitch_deg", cfg.misalign.pitch_scale / kDeg},
                     {"tomo_deg", cfg.misalign.tomo_scale / kDeg},
                     {"systematic", cfg.misalign.systematic},
                     {"random", cfg.misalign.random},
                     {"seed", cfg.misalign.seed}};
    auto scheme_name = [](const InterpScheme& s) {
        if (s.decomposition == Decomposition::plane2d)
            return s.kernel == Kernel::cubic ? "bicubic" : "bilinear";
        return s.kernel == Kernel::cubic ? "tricubic" : "trilinear";
    };
    j["simulate"] = {{"scheme", scheme_name(cfg.sim_scheme)},
                     {"noise_sigma", cfg.noise_sigma},
                     {"seed", cfg.noise_seed}};
    j["roi"]["enabled"] = cfg.roi_enabled;
    if (cfg.roi_enabled) {
        const Roi r = *cfg.roi();
        j["roi"]["px"] = r.px;
        j["roi"]["py"] = r.py;
        j["roi"]["x0"] = r.x0;
        j["roi"]["y0"] = r.y0;
    }
    j["recon"] = {{"method", cfg.recon.method == ReconConfig::Method::cg ? "cg" : "kaczmarz"},
                  {"alpha", cfg.recon.alpha},
                  {"epsilon", cfg.recon.epsilon},
                  {"max_iter", cfg.recon.max_iter},
                  {"nonneg", cfg.recon.nonneg},
                  {"inner_iter", cfg.recon.inner_iter},
                  {"warm_start", cfg.recon.warm_start}};
    if (cfg.alpha_delta) j["recon"]["alpha_delta"] = *cfg.alpha_delta;
    const char* alg = cfg.driver.algorithm == DriverConfig::Algorithm::smooth ? "smooth"
                      : cfg.driver.algorithm == DriverConfig::Algorithm::prox ? "prox"
                                                                              : "alternating";
    j["driver"] = {
        {"algorithm", alg},
        {"n_align", cfg.driver.n_align},
        {"schedule",
         cfg.driver.epsilon_schedule.type == EpsilonSchedule::Type::fixed ? "fixed" : "geometric"},
        {"eps_rate", cfg.driver.epsilon_schedule.rate},
        {"max_outer", cfg.driver.max_outer},
        {"stop_increment", cfg.driver.stop_increment},
        {"tether_lambda", cfg.driver.tether_lambda},
        {"fit_tomo_angle", cfg.driver.fit_tomo_angle},
        {"mode_removal",
         cfg.driver.mode_removal == DriverConfig::ModeRemoval::metrics_only ? "metrics" : "iterates"},
        {"weight_support",
         cfg.driver.weight_support == PhantomSpec::Support::cube ? "cube" : "cylinder"}};
    j["recon_scheme"] = scheme_name(cfg.recon_scheme);
    j["init"] = cfg.init == ExperimentConfig::Init::zero ? "zero" : "com";
    j["threads"] = cfg.threads;
    j["deterministic"] = cfg.deterministic;
    j["output"] = {{"save_volume", cfg.save_volume},
                   {"save_projections", cfg.save_projections},
                   {"save_truth", cfg.save_truth}};
    return j.dump(2);
}

}  // namespace tomo
