// cog3dmap: build and inspect streaming 3D token maps, and benchmark their
// compaction against frame concatenation.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cog3d/frame_source.hpp"
#include "cog3d/memory_core.hpp"
#include "cog3d/patching.hpp"
#include "cog3d/persistence.hpp"
#include "cog3d/spatial_index.hpp"

namespace {

using namespace cog3d;

struct RunConfig {
    std::string frames_dir;
    std::string scene_path;
    std::string delta_spec = "dynamic:0.03,1e-6,1e6";
    uint32_t patch = 32;
    uint32_t dimf = 0;  // 0 = take from input source
    uint32_t dimg = 0;
    std::size_t budget = 8000;
    uint64_t seed = 0;
    std::string out;
    std::string report = "csv";
    std::string report_out;
};

ThresholdPolicy parse_delta(const std::string& spec) {
    const auto colon = spec.find(':');
    const std::string kind = spec.substr(0, colon);
    const std::string args = colon == std::string::npos ? "" : spec.substr(colon + 1);
    try {
        if (kind == "static") {
            ThresholdPolicy p = ThresholdPolicy::static_delta(std::stod(args));
            p.validate();
            return p;
        }
        if (kind == "dynamic") {
            double vals[3];
            std::size_t begin = 0;
            for (int i = 0; i < 3; ++i) {
                const auto comma = args.find(',', begin);
                const std::string piece = args.substr(begin, comma - begin);
                vals[i] = std::stod(piece);
                if (comma == std::string::npos && i != 2) throw std::invalid_argument(args);
                begin = comma + 1;
            }
            ThresholdPolicy p = ThresholdPolicy::dynamic_delta(vals[0], vals[1], vals[2]);
            p.validate();
            return p;
        }
    } catch (const std::logic_error&) {
        // fall through to the shared error below
    } catch (const ConfigError&) {
    }
    throw ConfigError("bad --delta '" + spec + "', expected static:V or dynamic:RATIO,MIN,MAX");
}

std::vector<std::string> list_frame_files(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw ConfigError("--frames '" + dir + "' is not a directory");
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file()) files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ConfigError("--frames '" + dir + "' contains no files");
    return files;
}

// A frame sequence from either input source, optionally truncated /
// re-sampled to `count` frames for the sweep.
class FrameSequence {
public:
    FrameSequence(const RunConfig& cfg, uint32_t count) : cfg_(cfg) {
        if (!cfg.scene_path.empty()) {
            scene_ = load_scene(cfg.scene_path);
            if (cfg.dimf != 0) scene_->df = cfg.dimf;
            if (cfg.dimg != 0) scene_->dg = cfg.dimg;
            if (count != 0) resample_scene(count);
            n_ = scene_->n_frames();
        } else {
            files_ = list_frame_files(cfg.frames_dir);
            if (count != 0) {
                if (count > files_.size())
                    throw ConfigError("sweep count exceeds available frames");
                files_.resize(count);
            }
            n_ = uint32_t(files_.size());
        }
    }

    uint32_t size() const { return n_; }

    FrameBundle frame(uint32_t i) const {
        FrameBundle bundle = scene_ ? render_frame(*scene_, i, cfg_.patch)
                                    : load_frame(files_[i], cfg_.patch);
        if (!scene_) {
            if (cfg_.dimf != 0 && bundle.df != cfg_.dimf)
                throw InvalidFrame("frame df mismatch vs --dimf");
            if (cfg_.dimg != 0 && bundle.dg != cfg_.dimg)
                throw InvalidFrame("frame dg mismatch vs --dimg");
        }
        bundle.validate();
        return bundle;
    }

private:
    void resample_scene(uint32_t count) {
        auto& traj = scene_->trajectory;
        if (traj.kind == Trajectory::Kind::Orbit) {
            traj.n_frames = count;  // same path, count poses
        } else {
            if (count > traj.waypoints.size())
                throw ConfigError("sweep count exceeds available waypoints");
            std::vector<Trajectory::Waypoint> picked;
            for (uint32_t j = 0; j < count; ++j) {
                const std::size_t idx =
                    count == 1 ? 0 : std::size_t(j) * (traj.waypoints.size() - 1) / (count - 1);
                picked.push_back(traj.waypoints[idx]);
            }
            traj.waypoints = std::move(picked);
        }
    }

    const RunConfig& cfg_;
    std::optional<SceneSpec> scene_;
    std::vector<std::string> files_;
    uint32_t n_ = 0;
};

struct BuildResult {
    MemoryState state;
    std::vector<StepReport> reports;
    std::size_t baseline_tokens = 0;  // concatenation comparator: full patch grids
    uint32_t frames = 0;
    bool subsampled = false;
};

BuildResult run_build(const RunConfig& cfg, uint32_t count = 0) {
    FrameSequence seq(cfg, count);
    BuildResult result;
    result.frames = seq.size();

    bool initialized = false;
    for (uint32_t i = 0; i < seq.size(); ++i) {
        const FrameBundle bundle = seq.frame(i);
        if (!initialized) {
            result.state =
                MemoryState(bundle.df, bundle.dg, parse_delta(cfg.delta_spec), cfg.seed);
            initialized = true;
        }
        const PatchTokenSet tokens = pool_patches(bundle);
        result.reports.push_back(step(result.state, tokens));
        result.baseline_tokens +=
            std::size_t(bundle.height / bundle.patch_size) * (bundle.width / bundle.patch_size);
    }

    if (result.state.size() > cfg.budget) {
        result.state = subsample(result.state, cfg.budget, cfg.seed);
        result.subsampled = true;
    }
    return result;
}

std::ostream& report_sink(const RunConfig& cfg, std::ofstream& file) {
    if (cfg.report_out.empty()) return std::cout;
    file.open(cfg.report_out, std::ios::trunc);
    if (!file) throw ConfigError("cannot create report file '" + cfg.report_out + "'");
    return file;
}

void write_build_report(const RunConfig& cfg, const BuildResult& result, std::ostream& out) {
    if (cfg.report == "json") {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& r : result.reports)
            rows.push_back({{"step", r.step},
                            {"incoming", r.incoming},
                            {"retained", r.retained},
                            {"updated", r.updated},
                            {"added", r.added},
                            {"total", r.total_after},
                            {"delta", r.delta_used},
                            {"empty_frame", r.empty_frame},
                            {"ms", r.timing.total_ms}});
        out << rows.dump(2) << "\n";
    } else {
        out << "step,incoming,retained,updated,added,total,delta,empty_frame,ms\n";
        char line[256];
        for (const auto& r : result.reports) {
            std::snprintf(line, sizeof line, "%u,%zu,%zu,%zu,%zu,%zu,%.9g,%d,%.3f\n", r.step,
                          r.incoming, r.retained, r.updated, r.added, r.total_after, r.delta_used,
                          int(r.empty_frame), r.timing.total_ms);
            out << line;
        }
    }
}

int cmd_build(const RunConfig& cfg) {
    const BuildResult result = run_build(cfg);
    std::ofstream file;
    write_build_report(cfg, result, report_sink(cfg, file));
    if (result.subsampled)
        std::cerr << "note: map subsampled to budget " << cfg.budget << "\n";
    if (!cfg.out.empty()) {
        save_map(result.state, cfg.out);
        std::cerr << "map saved to " << cfg.out << " (" << result.state.size() << " tokens, "
                  << result.frames << " frames)\n";
    }
    return 0;
}

int cmd_compare(const RunConfig& cfg) {
    const BuildResult result = run_build(cfg);
    const double reduction =
        result.baseline_tokens == 0
            ? 0.0
            : 1.0 - double(result.state.size()) / double(result.baseline_tokens);

    std::ofstream file;
    std::ostream& out = report_sink(cfg, file);
    if (cfg.report == "json") {
        out << nlohmann::json{{"frames", result.frames},
                              {"baseline_tokens", result.baseline_tokens},
                              {"map_tokens", result.state.size()},
                              {"reduction", reduction}}
                   .dump(2)
            << "\n";
    } else {
        out << "frames,baseline_tokens,map_tokens,reduction\n";
        char line[128];
        std::snprintf(line, sizeof line, "%u,%zu,%zu,%.9g\n", result.frames,
                      result.baseline_tokens, result.state.size(), reduction);
        out << line;
    }
    if (!cfg.out.empty()) save_map(result.state, cfg.out);
    return 0;
}

int cmd_framesweep(const RunConfig& cfg, const std::vector<uint32_t>& counts) {
    std::ofstream file;
    std::ostream& out = report_sink(cfg, file);

    nlohmann::json json_rows = nlohmann::json::array();
    if (cfg.report != "json") out << "frames,map_tokens,chamfer_to_prev\n";

    std::vector<Vec3f> prev_positions;
    bool have_prev = false;
    for (uint32_t count : counts) {
        const BuildResult result = run_build(cfg, count);
        double chamfer = 0.0;
        if (have_prev)
            chamfer = chamfer_distance(prev_positions, result.state.positions);
        if (cfg.report == "json") {
            nlohmann::json row{{"frames", count}, {"map_tokens", result.state.size()}};
            if (have_prev) row["chamfer_to_prev"] = chamfer;
            json_rows.push_back(row);
        } else {
            char line[128];
            if (have_prev)
                std::snprintf(line, sizeof line, "%u,%zu,%.9g\n", count, result.state.size(),
                              chamfer);
            else
                std::snprintf(line, sizeof line, "%u,%zu,\n", count, result.state.size());
            out << line;
        }
        prev_positions = result.state.positions;
        have_prev = true;
    }
    if (cfg.report == "json") out << json_rows.dump(2) << "\n";
    return 0;
}

int cmd_stats(const std::string& map_path) {
    const MemoryState state = load_map(map_path);
    std::cout << "map: " << map_path << "\n"
              << "tokens: " << state.size() << "\n"
              << "step: " << state.step << "\n"
              << "dims: df=" << state.df << " dg=" << state.dg << "\n";
    if (state.delta_policy.mode == ThresholdPolicy::Mode::Static)
        std::cout << "delta: static value=" << state.delta_policy.value << "\n";
    else
        std::cout << "delta: dynamic ratio=" << state.delta_policy.ratio
                  << " min=" << state.delta_policy.min << " max=" << state.delta_policy.max
                  << "\n";
    std::cout << "seed: " << state.rng_seed << "\n";

    std::vector<std::size_t> created_hist(state.step + 1, 0);
    std::vector<std::size_t> updated_hist(state.step + 1, 0);
    for (std::size_t i = 0; i < state.size(); ++i) {
        if (state.created[i] < created_hist.size()) ++created_hist[state.created[i]];
        if (state.updated[i] < updated_hist.size()) ++updated_hist[state.updated[i]];
    }
    std::cout << "timestep,created,last_updated\n";
    for (std::size_t ts = 0; ts < created_hist.size(); ++ts) {
        if (created_hist[ts] == 0 && updated_hist[ts] == 0) continue;
        std::cout << ts << "," << created_hist[ts] << "," << updated_hist[ts] << "\n";
    }
    return 0;
}

int cmd_export(const std::string& map_path, const std::string& out_path) {
    const MemoryState state = load_map(map_path);
    export_ply(state, out_path);
    std::cerr << "wrote " << state.size() << " vertices to " << out_path << "\n";
    return 0;
}

void add_pipeline_flags(CLI::App* cmd, RunConfig& cfg, bool scene_only = false) {
    auto* frames = scene_only
                       ? nullptr
                       : cmd->add_option("--frames", cfg.frames_dir,
                                         "Directory of frame files, processed in name order");
    auto* scene =
        cmd->add_option("--scene", cfg.scene_path, "Synthetic scene spec (JSON)");
    if (frames != nullptr) {
        frames->excludes(scene);
        scene->excludes(frames);
    } else {
        scene->required();
    }
    cmd->add_option("--delta", cfg.delta_spec, "static:V or dynamic:RATIO,MIN,MAX")
        ->check([](const std::string& v) -> std::string {
            try {
                parse_delta(v);
                return {};
            } catch (const ConfigError& e) {
                return e.what();
            }
        });
    cmd->add_option("--patch", cfg.patch, "Merged patch edge in pixels")->check(CLI::PositiveNumber);
    cmd->add_option("--dimf", cfg.dimf, "Semantic feature dim (0 = from source)");
    cmd->add_option("--dimg", cfg.dimg, "Geometric feature dim (0 = from source)");
    cmd->add_option("--budget", cfg.budget, "Token budget cap")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", cfg.seed, "Seed for subsampling and synthetic noise");
    cmd->add_option("--report", cfg.report, "Report format")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--report-out", cfg.report_out, "Write the report here instead of stdout");
    if (frames != nullptr) {
        cmd->callback([frames, scene, cmd]() {
            if (frames->count() == 0 && scene->count() == 0)
                throw CLI::RequiredError(cmd->get_name() + " requires --frames or --scene");
        });
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cog3dmap: streaming 3D token map builder and benchmark harness"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::vector<uint32_t> sweep_counts;
    std::string map_path;

    auto* build = app.add_subcommand("build", "Build a map from frames and report per-step stats");
    add_pipeline_flags(build, cfg);
    build->add_option("--out", cfg.out, "Output map file");

    auto* compare =
        app.add_subcommand("compare", "Token reduction vs the frame-concatenation baseline");
    add_pipeline_flags(compare, cfg);
    compare->add_option("--out", cfg.out, "Optionally save the built map");

    auto* sweep = app.add_subcommand("framesweep", "Map size/consistency across frame counts");
    add_pipeline_flags(sweep, cfg);
    sweep->add_option("--counts", sweep_counts, "Frame counts to build at")
        ->required()
        ->delimiter(',');

    auto* stats = app.add_subcommand("stats", "Print map header and per-timestep histogram");
    stats->add_option("map", map_path, "Map file")->required();

    auto* exp = app.add_subcommand("export", "Write token positions as ASCII PLY");
    exp->add_option("map", map_path, "Map file")->required();
    std::string ply_out;
    exp->add_option("--out", ply_out, "Output PLY path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (build->parsed()) return cmd_build(cfg);
        if (compare->parsed()) return cmd_compare(cfg);
        if (sweep->parsed()) return cmd_framesweep(cfg, sweep_counts);
        if (stats->parsed()) return cmd_stats(map_path);
        if (exp->parsed()) return cmd_export(map_path, ply_out);
        return 1;
    } catch (const InternalInvariantViolation& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}
