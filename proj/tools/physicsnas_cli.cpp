// physicsnas: experiment grid, sweeps, ablation, failure probe and
// architecture export.

#include "physicsnas/bench.hpp"
#include "physicsnas/kernels.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace physicsnas;
namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::uint64_t seed = 1;
  std::size_t num_seeds = 5;
  std::vector<std::uint64_t> seeds;
  std::string out;
  int threads = 1;
  bool no_edge_weights = false;

  std::string task;
  std::string level;
  std::size_t n = 0;
  std::string method = "all";
  std::size_t epochs = 0;
  double lr = 0.0;
  std::size_t search_epochs = 0;
  double weight_lr = -1.0;
  double arch_lr = -1.0;
  std::size_t warmup = 0;
  std::size_t test_size = 0;
};

// Config file first, explicit flags on top.
ExperimentSpec load_spec(const Options& o, CLI::App& app, std::string& method) {
  ExperimentSpec s;
  method = "all";
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    if (!in) throw std::runtime_error("cannot open config '" + o.config + "'");
    const auto j = nlohmann::json::parse(in);
    if (j.contains("level")) s.level = j["level"].get<std::string>();
    s.task = j.contains("task") ? task_from_string(j["task"].get<std::string>())
                                : mismatch_preset(s.level).task;
    if (j.contains("n")) s.n = j["n"].get<std::size_t>();
    if (j.contains("method")) method = j["method"].get<std::string>();
    if (j.contains("seeds")) s.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    if (j.contains("out")) s.out_dir = j["out"].get<std::string>();
    if (j.contains("test_size")) s.test_size = j["test_size"].get<std::size_t>();
    if (j.contains("train")) {
      const auto& t = j["train"];
      if (t.contains("epochs")) s.train.epochs = t["epochs"].get<std::size_t>();
      if (t.contains("lr")) s.train.lr = t["lr"].get<double>();
    }
    if (j.contains("search")) {
      const auto& t = j["search"];
      if (t.contains("epochs")) s.search.epochs = t["epochs"].get<std::size_t>();
      if (t.contains("weight_lr")) s.search.weight_lr = t["weight_lr"].get<double>();
      if (t.contains("arch_lr")) s.search.arch_lr = t["arch_lr"].get<double>();
      if (t.contains("warmup_epochs")) s.search.warmup_epochs = t["warmup_epochs"].get<std::size_t>();
      if (t.contains("snapshot_interval")) s.search.snapshot_interval = t["snapshot_interval"].get<std::size_t>();
      if (t.contains("edge_weights")) s.search.edge_weights = t["edge_weights"].get<bool>();
    }
  }
  auto given = [&](const char* name) {
    const auto* opt = app.get_option_no_throw(name);
    if (!opt) opt = app.get_parent()->get_option_no_throw(name);
    return opt && opt->count() > 0;
  };
  if (!o.level.empty()) {
    s.level = o.level;
    s.task = mismatch_preset(s.level).task;
  }
  if (!o.task.empty()) {
    s.task = task_from_string(o.task);
    if (o.level.empty() && mismatch_preset(s.level).task != s.task)
      s.level = s.task == Task::Toss ? "toss-low" : "collision-low";
  }
  if (o.n) s.n = o.n;
  if (given("--seeds")) {
    s.seeds = o.seeds;
  } else if (given("--seed") || given("--num-seeds") || o.config.empty()) {
    s.seeds.clear();
    for (std::size_t i = 0; i < o.num_seeds; ++i) s.seeds.push_back(o.seed + i);
  }
  if (!o.out.empty()) s.out_dir = o.out;
  if (o.epochs) s.train.epochs = o.epochs;
  if (o.lr > 0.0) s.train.lr = o.lr;
  if (o.search_epochs) s.search.epochs = o.search_epochs;
  if (o.weight_lr >= 0.0) s.search.weight_lr = o.weight_lr;
  if (o.arch_lr >= 0.0) s.search.arch_lr = o.arch_lr;
  if (given("--warmup")) s.search.warmup_epochs = o.warmup;
  if (o.test_size) s.test_size = o.test_size;
  if (o.no_edge_weights) s.search.edge_weights = false;
  if (app.get_option_no_throw("--method") && given("--method")) method = o.method;
  if (method != "all") s.method = method_from_string(method);
  return s;
}

void add_spec_options(CLI::App& cmd, Options& o) {
  cmd.add_option("--task", o.task, "toss or collision");
  cmd.add_option("--level", o.level, "mismatch preset (toss-low, collision-high, ...) or custom level");
  cmd.add_option("-n,--samples", o.n, "training samples");
  cmd.add_option("--epochs", o.epochs, "training epochs (baselines and retraining)");
  cmd.add_option("--lr", o.lr, "training learning rate");
  cmd.add_option("--search-epochs", o.search_epochs, "search epochs");
  cmd.add_option("--weight-lr", o.weight_lr, "search learning rate of the network weights");
  cmd.add_option("--arch-lr", o.arch_lr, "search learning rate of the architecture logits");
  cmd.add_option("--warmup", o.warmup, "search epochs with weight steps only");
  cmd.add_option("--test-size", o.test_size, "test samples per cell");
}

int collapse_exit(const std::vector<ResultRow>& rows) {
  for (const auto& r : rows)
    for (const auto& s : r.seeds)
      if (!s.error) {
        std::fprintf(stderr, "%s %s seed %llu failed: %s\n", r.spec.cell().c_str(),
                     to_string(r.spec.method).c_str(), static_cast<unsigned long long>(s.seed),
                     s.failure.c_str());
      }
  for (const auto& r : rows)
    if (r.partial()) return 1;
  return 0;
}

void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path().empty() ? fs::path(".") : p.parent_path());
  std::ofstream(p) << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PhysicsNAS: architecture search with physical priors"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config, "JSON file mirroring the experiment spec");
  app.add_option("--seed", o.seed, "first seed");
  app.add_option("--num-seeds", o.num_seeds, "number of consecutive seeds from --seed");
  app.add_option("--seeds", o.seeds, "explicit seed list")->delimiter(',');
  app.add_option("--out", o.out, "output directory");
  app.add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--no-edge-weights", o.no_edge_weights, "select edges by max operation probability");

  auto* run_cmd = app.add_subcommand("run", "train and evaluate one cell");
  add_spec_options(*run_cmd, o);
  run_cmd->add_option("--method", o.method, "naive|fusion|residual|regularized|embedded|physicsnas|all");
  bool check = false;
  run_cmd->add_flag("--check", check, "fail unless physicsnas beats every baseline (needs --method all)");

  auto* sweep_cmd = app.add_subcommand("sweep", "all methods along the mismatch or samples axis");
  add_spec_options(*sweep_cmd, o);
  std::string axis_name = "samples";
  std::vector<std::size_t> sample_axis{32, 64, 128, 256};
  sweep_cmd->add_option("--axis", axis_name, "mismatch or samples");
  sweep_cmd->add_option("--counts", sample_axis, "sample counts for the samples axis")->delimiter(',');

  auto* ablate_cmd = app.add_subcommand("ablate-edge-weights", "search with and without edge weights");
  add_spec_options(*ablate_cmd, o);

  auto* probe_cmd = app.add_subcommand("failure-probe", "single-stream residual vs minimal searchable variant");
  add_spec_options(*probe_cmd, o);

  auto* export_cmd = app.add_subcommand("export-arch", "convert an architecture JSON file");
  std::string arch_in, format = "dot", arch_out;
  export_cmd->add_option("input", arch_in, "architecture JSON")->required();
  export_cmd->add_option("--format", format, "json or dot");
  export_cmd->add_option("-o,--output", arch_out, "output file (default stdout)");

  auto* gen_cmd = app.add_subcommand("generate", "write a dataset as JSON lines");
  add_spec_options(*gen_cmd, o);
  std::string gen_out;
  gen_cmd->add_option("-o,--output", gen_out, "output file (default stdout)");

  CLI11_PARSE(app, argc, argv);
  kernels::set_threads(1);

  try {
    if (*export_cmd) {
      std::ifstream in(arch_in);
      if (!in) throw std::runtime_error("cannot open '" + arch_in + "'");
      std::stringstream buf;
      buf << in.rdbuf();
      const auto text = export_architecture(architecture_from_json(buf.str()), arch_format_from_string(format));
      if (arch_out.empty()) std::cout << text;
      else write_file(arch_out, text);
      return 0;
    }

    auto* active = app.get_subcommands().front();
    std::string method;
    ExperimentSpec spec = load_spec(o, *active, method);

    if (*gen_cmd) {
      const auto level = mismatch_preset(spec.level);
      std::ostringstream os;
      write_jsonl(generate_dataset(spec.task, level, spec.n, spec.seeds.front()), os);
      if (gen_out.empty()) std::cout << os.str();
      else write_file(gen_out, os.str());
      return 0;
    }

    if (*run_cmd) {
      std::vector<ExperimentSpec> specs;
      if (method == "all") {
        for (auto m : all_methods()) {
          ExperimentSpec s = spec;
          s.method = m;
          specs.push_back(s);
        }
      } else {
        specs.push_back(spec);
      }
      const auto rows = run_all(specs, o.threads);
      persist(rows, spec.out_dir);
      std::cout << emit_table(rows);
      int code = collapse_exit(rows);
      if (check) {
        if (specs.size() != all_methods().size()) throw std::invalid_argument("--check needs --method all");
        const double nas = rows.back().median();
        bool ok = !std::isnan(nas);
        for (std::size_t i = 0; i + 1 < rows.size(); ++i) ok = ok && nas < rows[i].median();
        std::cout << (ok ? "check: PASS" : "check: FAIL") << " physicsnas median " << nas
                  << " vs every baseline median\n";
        if (!ok) code = 1;
      }
      return code;
    }

    if (*sweep_cmd) {
      const auto axis = sweep_axis_from_string(axis_name);
      const auto rows = run_all(sweep_specs(axis, spec, sample_axis), o.threads);
      persist(rows, spec.out_dir);
      const auto plot = emit_plot_csv(axis, rows);
      if (!spec.out_dir.empty()) write_file(fs::path(spec.out_dir) / "plot.csv", plot);
      std::cout << emit_table(rows) << '\n' << plot;
      return collapse_exit(rows);
    }

    if (*ablate_cmd) {
      const auto report = ablate(spec, o.threads);
      const auto csv = ablation_csv(report);
      std::cout << csv;
      if (!spec.out_dir.empty()) {
        const fs::path dir(spec.out_dir);
        write_file(dir / "ablation.csv", csv);
        for (std::size_t i = 0; i < spec.seeds.size(); ++i) {
          const auto tag = "seed" + std::to_string(spec.seeds[i]);
          write_file(dir / ("with_edge_weights_" + tag + ".dot"),
                     export_architecture(report.arch_with[i], ArchFormat::Dot));
          write_file(dir / ("without_edge_weights_" + tag + ".dot"),
                     export_architecture(report.arch_without[i], ArchFormat::Dot));
        }
      } else {
        std::cout << "\nwith edge weights (seed " << spec.seeds.front() << "):\n"
                  << export_architecture(report.arch_with.front(), ArchFormat::Dot)
                  << "\nwithout edge weights (seed " << spec.seeds.front() << "):\n"
                  << export_architecture(report.arch_without.front(), ArchFormat::Dot);
      }
      return 0;
    }

    if (*probe_cmd) {
      if (o.level.empty() && o.config.empty()) spec.level = "collision-probe";
      if (!o.n && o.config.empty()) spec.n = 32;
      spec.task = mismatch_preset(spec.level).task;
      const auto report = failure_probe(spec, o.threads);
      std::ostringstream csv;
      csv << "variant,median_error,errors\n";
      auto list = [](const std::vector<double>& v) {
        std::string s;
        char buf[40];
        for (std::size_t i = 0; i < v.size(); ++i) {
          std::snprintf(buf, sizeof buf, "%.17g", v[i]);
          s += (i ? ";" : "") + std::string(buf);
        }
        return s;
      };
      char med[40];
      std::snprintf(med, sizeof med, "%.17g", report.median_hand_built());
      csv << "hand_built," << med << ',' << list(report.hand_built) << '\n';
      std::snprintf(med, sizeof med, "%.17g", report.median_searchable());
      csv << "searchable," << med << ',' << list(report.searchable) << '\n';
      std::cout << csv.str() << "\nhand-built:\n" << export_architecture(report.hand_arch, ArchFormat::Dot)
                << "\nsearchable (seed " << spec.seeds.front() << "):\n"
                << export_architecture(report.searched.front(), ArchFormat::Dot);
      if (!spec.out_dir.empty()) {
        const fs::path dir(spec.out_dir);
        write_file(dir / "probe.csv", csv.str());
        write_file(dir / "hand_built.dot", export_architecture(report.hand_arch, ArchFormat::Dot));
        for (std::size_t i = 0; i < spec.seeds.size(); ++i)
          write_file(dir / ("searchable_seed" + std::to_string(spec.seeds[i]) + ".dot"),
                     export_architecture(report.searched[i], ArchFormat::Dot));
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
