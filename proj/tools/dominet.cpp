#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "dominet/commands.hpp"
#include "dominet/error.hpp"
#include "dominet/parallel.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "key = value config file")->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "master seed (overrides the config)");
  sub->add_option("--threads", c.threads, "worker threads (default: DOMINET_THREADS or all cores)")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--out", c.out, "output directory (overrides the config)");
}

dominet::RunConfig resolve(const Common& c) {
  dominet::RunConfig cfg = c.config.empty() ? dominet::RunConfig{} : dominet::load_config(c.config);
  if (c.seed) cfg.set_seed(*c.seed);
  if (!c.out.empty()) cfg.out_dir = c.out;
  if (c.threads) {
    cfg.threads = *c.threads;
  } else if (cfg.threads == 0) {
    if (const char* env = std::getenv("DOMINET_THREADS")) {
      try {
        cfg.threads = std::stoi(env);
      } catch (const std::exception&) {
        throw dominet::Error(dominet::ErrorCode::Usage,
                             std::string("DOMINET_THREADS is not an integer: ") + env);
      }
      if (cfg.threads < 0) {
        throw dominet::Error(dominet::ErrorCode::Usage, "DOMINET_THREADS must be >= 0");
      }
    }
  }
  dominet::parallel::set_threads(cfg.threads);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dominet: dominant-unit detection and classification"};
  app.require_subcommand(1);
  Common common;

  std::string panel;
  auto* network = app.add_subcommand("network", "rank units of a panel by network influence");
  network->add_option("panel", panel, "panel CSV (date,<unit...>)")->required()->check(CLI::ExistingFile);
  add_common(network, common);

  std::string features;
  std::string labels;
  auto* classify = app.add_subcommand("classify", "random-forest classification with importance");
  classify->add_option("features", features, "feature CSV (unit,label,<feature...>)")
      ->required()
      ->check(CLI::ExistingFile);
  classify->add_option("--labels", labels, "unit,label CSV overriding the label column")
      ->check(CLI::ExistingFile);
  add_common(classify, common);

  auto* tune = app.add_subcommand("tune", "cross-validated mtry search");
  tune->add_option("features", features, "feature CSV")->required()->check(CLI::ExistingFile);
  tune->add_option("--labels", labels, "unit,label CSV")->check(CLI::ExistingFile);
  add_common(tune, common);

  std::string kind = "both";
  auto* synth = app.add_subcommand("synth", "generate synthetic data with known ground truth");
  synth->add_option("--kind", kind, "panel, classification or both")
      ->check(CLI::IsMember({"panel", "classification", "both"}));
  add_common(synth, common);

  std::string report_dir;
  auto* report = app.add_subcommand("report", "summarize reports in a directory");
  report->add_option("dir", report_dir, "report directory")->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    const std::optional<std::filesystem::path> label_path =
        labels.empty() ? std::nullopt : std::optional<std::filesystem::path>(labels);
    if (*network) {
      dominet::cmd_network(panel, resolve(common), std::cout);
    } else if (*classify) {
      dominet::cmd_classify(features, label_path, resolve(common), std::cout);
    } else if (*tune) {
      dominet::cmd_tune(features, label_path, resolve(common), std::cout);
    } else if (*synth) {
      dominet::cmd_synth(kind, resolve(common), std::cout);
    } else if (*report) {
      dominet::cmd_report(report_dir, std::cout);
    }
  } catch (const dominet::Error& e) {
    std::cerr << "dominet: " << dominet::to_string(e.code()) << " error: " << e.what() << "\n";
    return dominet::exit_code_for(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "dominet: io error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "dominet: error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
