#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "memforge/pipeline.hpp"

namespace {

using namespace memforge;

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;  // parse/validation/infeasibility failures
constexpr int kExitUsage = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
}

Kernel load_kernel(const std::string& path) {
  ParseResult pr = parse_kernel(read_file(path));
  if (!pr.ok()) throw Error(path + ":\n" + format_diagnostics(pr.diags));
  return std::move(*pr.kernel);
}

PlatformSpec load_platform(const std::string& path) {
  PlatformParseResult pr = parse_platform(read_file(path));
  if (!pr.ok()) throw Error(path + ":\n" + format_diagnostics(pr.diags));
  return std::move(*pr.platform);
}

struct CommonFlags {
  std::string out_dir = ".";
  std::string report = "text";
  u64 cap = kDefaultIterationCap;
  double alpha = -1.0;  // <0 = keep platform value
  bool no_data_org = false, no_layout = false, no_comm = false, no_partition = false;
  std::string trace_csv;
};

void add_pipeline_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--cap", f.cap, "Dynamic statement-instance cap");
  cmd->add_option("--alpha", f.alpha, "Override the bank port-area factor");
  cmd->add_flag("--no-data-org", f.no_data_org, "Skip placement (everything streams)");
  cmd->add_flag("--no-layout", f.no_layout, "Skip layout selection and tiling");
  cmd->add_flag("--no-comm", f.no_comm, "Make every tile transfer blocking");
  cmd->add_flag("--no-partition", f.no_partition, "Single-port capacity banking, no sharing");
}

PipelineOptions to_options(const CommonFlags& f, bool emit, bool sim) {
  PipelineOptions o;
  o.cap = f.cap;
  if (f.alpha >= 0) o.alpha = f.alpha;
  o.enable_data_org = !f.no_data_org;
  o.enable_layout = !f.no_layout;
  o.enable_comm = !f.no_comm;
  o.enable_partition = !f.no_partition;
  o.run_emit = emit;
  o.run_simulate = sim;
  return o;
}

bool env_cap(u64& cap, std::string& err) {
  const char* v = std::getenv("MEMFORGE_CAP");
  if (!v || !*v) return true;
  char* end = nullptr;
  unsigned long long parsed = std::strtoull(v, &end, 10);
  if (!end || *end != '\0') {
    err = "MEMFORGE_CAP is not a non-negative integer: '" + std::string(v) + "'";
    return false;
  }
  cap = parsed;
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"memforge: specializes a memory architecture to one kernel"};
  app.require_subcommand(1);

  CommonFlags cf;
  std::string kernel_path, platform_path, arch_path, phase_name;

  CLI::App* compile = app.add_subcommand(
      "compile", "Run all phases; write arch.json, lowered.ir and report.json");
  compile->add_option("kernel", kernel_path, "Kernel IR file")->required();
  compile->add_option("platform", platform_path, "Platform JSON file")->required();
  compile->add_option("-o,--out", cf.out_dir, "Output directory (default .)");
  compile->add_option("--report", cf.report, "Report format on stdout: text|json")
      ->check(CLI::IsMember({"text", "json"}));
  compile->add_option("--trace-csv", cf.trace_csv, "Write a per-instance stall trace");
  add_pipeline_flags(compile, cf);

  CLI::App* phase = app.add_subcommand("phase", "Run the pipeline, print one phase's plan");
  phase->add_option("name", phase_name, "data-org|layout|comm|partition|emit")
      ->required()
      ->check(CLI::IsMember({"data-org", "layout", "comm", "partition", "emit"}));
  phase->add_option("kernel", kernel_path, "Kernel IR file")->required();
  phase->add_option("platform", platform_path, "Platform JSON file")->required();
  add_pipeline_flags(phase, cf);

  CLI::App* sim = app.add_subcommand("simulate", "Replay a kernel against an architecture");
  sim->add_option("kernel", kernel_path, "Kernel IR file")->required();
  sim->add_option("arch", arch_path, "Architecture JSON file")->required();
  sim->add_option("platform", platform_path, "Platform JSON file")->required();
  sim->add_option("--report", cf.report, "Report format: text|json")
      ->check(CLI::IsMember({"text", "json"}));
  sim->add_option("--cap", cf.cap, "Dynamic statement-instance cap");
  sim->add_option("--trace-csv", cf.trace_csv, "Write a per-instance stall trace");

  CLI::App* check = app.add_subcommand("check", "Validate inputs without compiling");
  check->add_option("kernel", kernel_path, "Kernel IR file")->required();
  check->add_option("platform", platform_path, "Optional platform JSON file");
  check->add_option("--cap", cf.cap, "Dynamic statement-instance cap");

  {
    std::string err;
    if (!env_cap(cf.cap, err)) {
      std::cerr << "error: " << err << "\n";
      return kExitUsage;
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (compile->parsed()) {
      Kernel k = load_kernel(kernel_path);
      PlatformSpec p = load_platform(platform_path);
      PipelineResult r = run_pipeline(k, p, to_options(cf, true, true));
      write_file(cf.out_dir + "/arch.json", r.architecture.dump());
      write_file(cf.out_dir + "/lowered.ir", r.lowered_text);
      write_file(cf.out_dir + "/report.json", r.report_json().dump(2) + "\n");
      if (!cf.trace_csv.empty()) {
        std::ostringstream csv;
        simulate(r.lowered, r.architecture, r.platform, cf.cap, &csv);
        write_file(cf.trace_csv, csv.str());
      }
      if (cf.report == "json")
        std::cout << r.report_json().dump(2) << "\n";
      else
        std::cout << r.report_text();
      return kExitOk;
    }

    if (phase->parsed()) {
      Kernel k = load_kernel(kernel_path);
      PlatformSpec p = load_platform(platform_path);
      PipelineResult r = run_pipeline(k, p, to_options(cf, phase_name == "emit", false));
      nlohmann::json out;
      if (phase_name == "data-org")
        out = r.placement.to_json();
      else if (phase_name == "layout")
        out = {{"layout", r.layout.to_json()}, {"tiling", r.tiling.to_json()}};
      else if (phase_name == "comm")
        out = r.prefetch.to_json();
      else if (phase_name == "partition") {
        nlohmann::json lts = nlohmann::json::object();
        for (const auto& [name, lt] : r.lifetimes)
          lts[name] = {{"first", lt.first}, {"last", lt.last}};
        out = {{"banking", r.banking.to_json()},
               {"lifetimes", std::move(lts)},
               {"sharing", r.sharing.to_json()}};
      } else {
        out = {{"arch", r.architecture.to_json()}, {"lowered", r.lowered_text}};
      }
      std::cout << out.dump(2) << "\n";
      return kExitOk;
    }

    if (sim->parsed()) {
      Kernel k = load_kernel(kernel_path);
      PlatformSpec p = load_platform(platform_path);
      ArchParseResult ar = parse_architecture(read_file(arch_path));
      if (!ar.ok()) throw Error(arch_path + ":\n" + format_diagnostics(ar.diags));
      std::ostringstream csv;
      EvalReport rep = simulate(k, *ar.arch, p, cf.cap, cf.trace_csv.empty() ? nullptr : &csv);
      if (!cf.trace_csv.empty()) write_file(cf.trace_csv, csv.str());
      if (cf.report == "json") {
        std::cout << rep.to_json().dump(2) << "\n";
      } else {
        std::cout << "total " << rep.total_cycles << " cycles (compute " << rep.compute_cycles
                  << ", stall " << rep.stall_cycles() << "), off-chip " << rep.offchip_bytes
                  << " bytes\n";
      }
      return kExitOk;
    }

    if (check->parsed()) {
      Kernel k = load_kernel(kernel_path);
      validate_dynamic(k, cf.cap);
      if (!platform_path.empty()) load_platform(platform_path);
      std::cout << "ok\n";
      return kExitOk;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitUsage;
}
