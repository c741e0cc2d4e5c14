#include "sct/config.hpp"

#include <cmath>
#include <initializer_list>
#include <numbers>
#include <set>

#include <yaml-cpp/yaml.h>

#include "sct/error.hpp"
#include "sct/io.hpp"

namespace sct {

namespace {

/// YAML node plus its dotted key path for diagnostics.
class Section {
public:
    Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {}

    bool has(const std::string& key) const { return node_[key].IsDefined() && !node_[key].IsNull(); }

    Section child(const std::string& key) const {
        if (!has(key)) throw ConfigError("missing required key '" + join(key) + "'");
        return {node_[key], join(key)};
    }

    void require_map() const {
        if (!node_.IsMap()) throw ConfigError("'" + name() + "' must be a mapping");
    }

    void allow_only(std::initializer_list<const char*> keys) const {
        require_map();
        const std::set<std::string> allowed(keys.begin(), keys.end());
        for (const auto& kv : node_) {
            const auto key = kv.first.as<std::string>();
            if (!allowed.count(key)) throw ConfigError("unknown key '" + join(key) + "'");
        }
    }

    template <typename T>
    T get(const std::string& key) const {
        if (!has(key)) throw ConfigError("missing required key '" + join(key) + "'");
        return convert<T>(node_[key], join(key));
    }

    template <typename T>
    T get_or(const std::string& key, T fallback) const {
        return has(key) ? convert<T>(node_[key], join(key)) : fallback;
    }

    std::vector<Section> items(const std::string& key) const {
        const auto seq = child(key);
        if (!seq.node_.IsSequence()) throw ConfigError("'" + seq.name() + "' must be a list");
        std::vector<Section> out;
        for (std::size_t i = 0; i < seq.node_.size(); ++i) {
            out.emplace_back(seq.node_[i], seq.name() + "[" + std::to_string(i) + "]");
        }
        return out;
    }

    const std::string& name() const { return path_; }

private:
    std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    template <typename T>
    static T convert(const YAML::Node& n, const std::string& where) {
        try {
            return n.as<T>();
        } catch (const YAML::Exception&) {
            throw ConfigError("invalid value for '" + where + "'");
        }
    }

    YAML::Node node_;
    std::string path_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

void parse_geometry(const Section& s, FanBeamGeometry& g) {
    s.allow_only({"n_views", "n_channels", "source_iso_mm", "source_det_mm", "det_pitch_mm", "angular_range_deg",
                  "start_angle_deg", "image_n", "voxel_mm", "fov_mm"});
    g.n_views = s.get_or("n_views", g.n_views);
    g.n_channels = s.get_or("n_channels", g.n_channels);
    g.source_iso_mm = s.get_or("source_iso_mm", g.source_iso_mm);
    g.source_det_mm = s.get_or("source_det_mm", g.source_det_mm);
    g.det_pitch_mm = s.get_or("det_pitch_mm", g.det_pitch_mm);
    g.angular_range_rad = s.get_or("angular_range_deg", 360.0) * std::numbers::pi / 180.0;
    g.start_angle_rad = s.get_or("start_angle_deg", 0.0) * std::numbers::pi / 180.0;
    g.image_n = s.get_or("image_n", g.image_n);
    g.voxel_mm = s.get_or("voxel_mm", g.voxel_mm);
    g.fov_mm = s.get_or("fov_mm", g.fov_mm);
    g.validate();
}

} // namespace

PhantomSpec PhantomConfig::spec(const FanBeamGeometry& geom) const {
    PhantomSpec out;
    out.complement = complement;
    out.background_radius_mm = background_radius_mm;
    out.image_n = geom.image_n;
    out.voxel_mm = geom.voxel_mm;
    for (const auto& tc : tubes) {
        Tube t = tc.tube;
        t.concentration_mg_per_ml = scan == ScanSet::calibration ? tc.calibration_mg_per_ml : tc.test_mg_per_ml;
        out.tubes.push_back(t);
    }
    return out;
}

std::vector<std::string> RunConfig::material_names() const { return mixing.materials; }

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("config is not valid YAML: ") + e.what());
    }
    const Section top(root, "");
    top.allow_only({"seed", "threads", "geometry", "materials", "mixing", "phantom", "acquisition", "optimizer",
                    "calibration", "paths"});

    RunConfig cfg;
    cfg.seed = top.get_or<std::uint64_t>("seed", cfg.seed);
    cfg.threads = top.get_or("threads", cfg.threads);
    if (cfg.threads < 1) throw ConfigError("'threads' must be >= 1");

    if (top.has("geometry")) parse_geometry(top.child("geometry"), cfg.geometry);

    // Without these sections the reference four-material model is used.
    if (!top.has("materials")) cfg.materials = reference_materials();
    else for (const auto& m : top.items("materials")) {
        m.allow_only({"name", "density_mg_per_ml", "role"});
        MaterialSpec spec;
        spec.name = m.get<std::string>("name");
        spec.density_mg_per_ml = m.get<double>("density_mg_per_ml");
        if (!(spec.density_mg_per_ml > 0.0)) throw ConfigError("'" + m.name() + ".density_mg_per_ml' must be > 0");
        try {
            spec.role = parse_material_role(m.get_or<std::string>("role", "contrast"));
        } catch (const ConfigError& e) {
            throw ConfigError("'" + m.name() + ".role': " + e.what());
        }
        cfg.materials.push_back(spec);
    }

    if (!top.has("mixing")) {
        cfg.mixing = reference_mixing_matrix();
    } else {
        const auto mix = top.child("mixing");
        mix.allow_only({"file", "bins_kev", "lac_per_mm"});
        if (mix.has("file")) {
            const auto path = resolve(base_dir, mix.get<std::string>("file"));
            try {
                cfg.mixing = read_mixing_matrix(path);
            } catch (const Error& e) {
                throw ConfigError(std::string("'mixing.file': ") + e.what());
            }
        } else {
            const auto rows = mix.get<std::vector<std::vector<double>>>("lac_per_mm");
            if (rows.empty()) throw ConfigError("'mixing.lac_per_mm' must not be empty");
            cfg.mixing.lac.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
            for (std::size_t e = 0; e < rows.size(); ++e) {
                if (rows[e].size() != rows[0].size()) throw ConfigError("'mixing.lac_per_mm' rows differ in length");
                for (std::size_t m = 0; m < rows[e].size(); ++m) cfg.mixing.lac(e, m) = rows[e][m];
            }
            cfg.mixing.bin_edges_kev = mix.get<std::vector<double>>("bins_kev");
            for (const auto& m : cfg.materials) cfg.mixing.materials.push_back(m.name);
        }
    }
    try {
        cfg.mixing.validate();
    } catch (const Error& e) {
        throw ConfigError(std::string("'mixing': ") + e.what());
    }
    if (cfg.mixing.materials.size() != cfg.materials.size()) {
        throw ConfigError("'mixing' and 'materials' list different numbers of materials");
    }
    for (std::size_t i = 0; i < cfg.materials.size(); ++i) {
        if (cfg.mixing.materials[i] != cfg.materials[i].name) {
            throw ConfigError("'mixing' material order does not match 'materials' (" + cfg.mixing.materials[i] +
                              " vs " + cfg.materials[i].name + ")");
        }
    }

    if (top.has("phantom")) {
        const auto ph = top.child("phantom");
        ph.allow_only({"scan", "complement", "background_radius_mm", "roi_half_width", "tubes"});
        const auto scan = ph.get_or<std::string>("scan", "test");
        if (scan == "test") cfg.phantom.scan = ScanSet::test;
        else if (scan == "calibration") cfg.phantom.scan = ScanSet::calibration;
        else throw ConfigError("'phantom.scan' must be 'test' or 'calibration'");
        cfg.phantom.complement = ph.get_or<std::string>("complement", cfg.phantom.complement);
        cfg.phantom.background_radius_mm = ph.get_or("background_radius_mm", cfg.phantom.background_radius_mm);
        if (ph.has("roi_half_width")) cfg.phantom.roi_half_width = ph.get<int>("roi_half_width");
        if (ph.has("tubes")) for (const auto& t : ph.items("tubes")) {
            t.allow_only({"label", "center_mm", "radius_mm", "solute", "calibration_mg_per_ml", "test_mg_per_ml",
                          "density_mg_per_ml"});
            TubeConfig tc;
            tc.tube.label = t.get<std::string>("label");
            const auto c = t.get<std::vector<double>>("center_mm");
            if (c.size() != 2) throw ConfigError("'" + t.name() + ".center_mm' must be [x, y]");
            tc.tube.center_x_mm = c[0];
            tc.tube.center_y_mm = c[1];
            tc.tube.radius_mm = t.get<double>("radius_mm");
            tc.tube.solute = t.get<std::string>("solute");
            tc.calibration_mg_per_ml = t.get_or("calibration_mg_per_ml", 0.0);
            tc.test_mg_per_ml = t.get_or("test_mg_per_ml", 0.0);
            if (t.has("density_mg_per_ml")) tc.tube.density_override = t.get<double>("density_mg_per_ml");
            cfg.phantom.tubes.push_back(tc);
        }
    }
    if (cfg.phantom.tubes.empty()) {
        const auto test = reference_phantom_spec(ScanSet::test);
        const auto cal = reference_phantom_spec(ScanSet::calibration);
        for (std::size_t i = 0; i < test.tubes.size(); ++i) {
            cfg.phantom.tubes.push_back({test.tubes[i], cal.tubes[i].concentration_mg_per_ml,
                                         test.tubes[i].concentration_mg_per_ml});
        }
    }

    if (top.has("acquisition")) {
        const auto a = top.child("acquisition");
        a.allow_only({"i0", "mean_counts", "noise", "defect_rate", "repaired_weight"});
        if (a.has("i0")) cfg.acquisition.i0 = a.get<std::vector<double>>("i0");
        cfg.acquisition.mean_counts = a.get_or("mean_counts", cfg.acquisition.mean_counts);
        const auto noise = a.get_or<std::string>("noise", "poisson");
        if (noise == "poisson") cfg.acquisition.noise = NoiseMode::poisson;
        else if (noise == "none") cfg.acquisition.noise = NoiseMode::noiseless;
        else throw ConfigError("'acquisition.noise' must be 'poisson' or 'none'");
        cfg.acquisition.defect_rate = a.get_or("defect_rate", cfg.acquisition.defect_rate);
        cfg.acquisition.repaired_weight = a.get_or("repaired_weight", cfg.acquisition.repaired_weight);
    }
    if (cfg.acquisition.i0 && cfg.acquisition.i0->size() != static_cast<std::size_t>(cfg.mixing.n_bins())) {
        throw ConfigError("'acquisition.i0' needs one value per energy bin");
    }
    if (!(cfg.acquisition.mean_counts > 0.0)) throw ConfigError("'acquisition.mean_counts' must be > 0");
    if (!(cfg.acquisition.defect_rate >= 0.0 && cfg.acquisition.defect_rate <= 0.05)) {
        throw ConfigError("'acquisition.defect_rate' must lie in [0, 0.05]");
    }
    if (!(cfg.acquisition.repaired_weight > 0.0 && cfg.acquisition.repaired_weight <= 1.0)) {
        throw ConfigError("'acquisition.repaired_weight' must lie in (0, 1]");
    }

    if (top.has("optimizer")) {
        const auto o = top.child("optimizer");
        o.allow_only({"sigma", "prior_fraction", "iterations", "tolerance", "order", "checkpoint_every", "resume"});
        if (o.has("sigma")) {
            const auto sigma = o.get<std::string>("sigma");
            if (sigma != "auto") {
                const double v = o.get<double>("sigma");
                if (!(v > 0.0)) throw ConfigError("'optimizer.sigma' must be > 0 or 'auto'");
                cfg.optimizer.sigma = v;
            }
        }
        cfg.optimizer.prior_fraction = o.get_or("prior_fraction", cfg.optimizer.prior_fraction);
        cfg.optimizer.iterations = o.get_or("iterations", cfg.optimizer.iterations);
        cfg.optimizer.tolerance = o.get_or("tolerance", cfg.optimizer.tolerance);
        const auto order = o.get_or<std::string>("order", "raster");
        if (order == "raster") cfg.optimizer.order = VisitOrder::raster;
        else if (order == "shuffled") cfg.optimizer.order = VisitOrder::shuffled;
        else throw ConfigError("'optimizer.order' must be 'raster' or 'shuffled'");
        cfg.optimizer.checkpoint_every = o.get_or("checkpoint_every", cfg.optimizer.checkpoint_every);
        cfg.optimizer.resume = o.get_or("resume", cfg.optimizer.resume);
    }
    if (!(cfg.optimizer.prior_fraction > 0.0)) throw ConfigError("'optimizer.prior_fraction' must be > 0");
    if (cfg.optimizer.iterations < 0) throw ConfigError("'optimizer.iterations' must be >= 0");
    if (cfg.optimizer.tolerance < 0.0) throw ConfigError("'optimizer.tolerance' must be >= 0");
    if (cfg.optimizer.checkpoint_every < 0) throw ConfigError("'optimizer.checkpoint_every' must be >= 0");

    if (top.has("calibration")) {
        const auto c = top.child("calibration");
        c.allow_only({"lac_images", "max_condition", "iterations"});
        if (c.has("lac_images")) cfg.calibration.lac_images = resolve(base_dir, c.get<std::string>("lac_images"));
        cfg.calibration.max_condition = c.get_or("max_condition", cfg.calibration.max_condition);
        cfg.calibration.iterations = c.get_or("iterations", cfg.calibration.iterations);
        if (!(cfg.calibration.max_condition > 1.0)) throw ConfigError("'calibration.max_condition' must be > 1");
        if (cfg.calibration.iterations < 0) throw ConfigError("'calibration.iterations' must be >= 0");
    }

    auto& p = cfg.paths;
    if (top.has("paths")) {
        const auto s = top.child("paths");
        s.allow_only({"sinogram", "truth", "lac_images", "mixing", "output_dir", "checkpoint", "cost_log",
                      "report_txt", "report_csv"});
        p.sinogram = s.get_or<std::string>("sinogram", p.sinogram.string());
        p.truth = s.get_or<std::string>("truth", p.truth.string());
        p.lac_images = s.get_or<std::string>("lac_images", p.lac_images.string());
        if (s.has("mixing")) p.mixing = s.get<std::string>("mixing");
        p.output_dir = s.get_or<std::string>("output_dir", p.output_dir.string());
        p.checkpoint = s.get_or<std::string>("checkpoint", p.checkpoint.string());
        p.cost_log = s.get_or<std::string>("cost_log", p.cost_log.string());
        p.report_txt = s.get_or<std::string>("report_txt", p.report_txt.string());
        p.report_csv = s.get_or<std::string>("report_csv", p.report_csv.string());
    }
    for (auto* path : {&p.sinogram, &p.truth, &p.lac_images, &p.output_dir, &p.checkpoint, &p.cost_log,
                       &p.report_txt, &p.report_csv}) {
        *path = resolve(base_dir, path->string());
    }
    if (p.mixing) p.mixing = resolve(base_dir, p.mixing->string());
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
    RunConfig cfg = parse_config(read_file(path), std::filesystem::absolute(path).parent_path());
    cfg.source = path;
    return cfg;
}

} // namespace sct
