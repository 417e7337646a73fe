#include <algorithm>
#include <array>
#include <cstdint>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "limbguard/errors.hpp"
#include "limbguard/gaitsim.hpp"
#include "limbguard/numio.hpp"
#include "limbguard/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitMissingArtifact = 3;
constexpr int kExitDiverged = 4;

void add_data_flags(CLI::App* cmd, limbguard::PipelineOptions& opt) {
  cmd->add_option("--manifest", opt.manifest, "Trial manifest CSV")->required();
  cmd->add_option("--window", opt.filter_window, "Motion filter window, samples")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--vmin", opt.filter_vmin, "Motion filter RMS velocity floor, m/s")
      ->check(CLI::NonNegativeNumber);
}

void add_out_flag(CLI::App* cmd, limbguard::PipelineOptions& opt) {
  cmd->add_option("--out", opt.out_dir, "Artifact directory")->required();
}

void add_seed_flag(CLI::App* cmd, limbguard::PipelineOptions& opt) {
  cmd->add_option("--seed", opt.seed, "Seed for splits and training");
}

int run(int argc, char** argv) {
  CLI::App app{"Per-limb gait anomaly detection for a pronking quadruped"};
  app.require_subcommand(1);

  limbguard::PipelineOptions opt;
  limbguard::GaitParams gait;
  limbguard::CorpusSpec corpus;
  std::vector<std::size_t> counts;

  CLI::App* simulate = app.add_subcommand("simulate", "Generate a synthetic trial corpus");
  simulate->add_option("--out", opt.out_dir, "Corpus directory")->required();
  simulate->add_option("--seed", gait.seed, "Corpus seed");
  simulate->add_option("--counts", counts,
                       "Trials per condition: None,LF,RF,LB,RB")
      ->delimiter(',')
      ->expected(1, 5);

  CLI::App* train = app.add_subcommand("train", "Train the four per-limb autoencoders");
  add_data_flags(train, opt);
  add_out_flag(train, opt);
  add_seed_flag(train, opt);
  train->add_option("--epochs", opt.epochs, "Training epochs")->check(CLI::PositiveNumber);
  train->add_option("--batch", opt.batch_size, "Mini-batch size")->check(CLI::PositiveNumber);
  train->add_option("--lr", opt.learning_rate, "Learning rate");

  CLI::App* calibrate = app.add_subcommand("calibrate", "Select multipliers and write thresholds");
  add_data_flags(calibrate, opt);
  add_out_flag(calibrate, opt);
  add_seed_flag(calibrate, opt);
  calibrate->add_option("--x-candidates", opt.x_candidates,
                        "Threshold multiplier candidates")
      ->delimiter(',');

  CLI::App* detect = app.add_subcommand("detect", "Localize faults on manifest trials");
  add_data_flags(detect, opt);
  add_out_flag(detect, opt);
  detect->add_option("--decision-level", opt.decision_level,
                     "Minimum anomaly fraction to name a limb");

  CLI::App* evaluate = app.add_subcommand("evaluate", "Test-pool rates, histograms, confusion");
  add_data_flags(evaluate, opt);
  add_out_flag(evaluate, opt);
  add_seed_flag(evaluate, opt);
  evaluate->add_option("--decision-level", opt.decision_level,
                       "Minimum anomaly fraction to name a limb");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (simulate->parsed()) {
    if (!counts.empty()) {
      if (counts.size() != corpus.counts.size()) {
        std::cerr << "--counts needs " << corpus.counts.size() << " values\n";
        return kExitUsage;
      }
      std::copy(counts.begin(), counts.end(), corpus.counts.begin());
    }
    const auto manifest = limbguard::generate_corpus(corpus, gait, opt.out_dir);
    std::cout << manifest.string() << '\n';
    return kExitOk;
  }

  if (train->parsed()) {
    const auto histories = limbguard::run_train(opt);
    for (int limb = 0; limb < 4; ++limb) {
      const auto& h = histories[static_cast<std::size_t>(limb)];
      std::cout << "limb " << limb << ": train "
                << limbguard::numio::format(h.train_loss.back()) << " val "
                << limbguard::numio::format(h.val_loss.back()) << " -> "
                << limbguard::model_path(opt.out_dir, limb).string() << '\n';
    }
    return kExitOk;
  }

  if (calibrate->parsed()) {
    const auto searches = limbguard::run_calibrate(opt);
    for (int limb = 0; limb < 4; ++limb) {
      const auto& s = searches[static_cast<std::size_t>(limb)];
      for (const auto& c : s.candidates) {
        if (c.x != s.selected) continue;
        std::cout << "limb " << limb << ": x " << limbguard::numio::format(c.x)
                  << " threshold " << limbguard::numio::format(c.threshold)
                  << " recall " << limbguard::numio::format(c.recall)
                  << " specificity " << limbguard::numio::format(c.specificity)
                  << '\n';
      }
    }
    return kExitOk;
  }

  if (detect->parsed()) {
    const auto results = limbguard::run_detect(opt);
    for (const auto& r : results) {
      if (r.empty_after_filter) {
        std::cerr << r.trial_id << ": no motion after filtering\n";
      } else if (r.report.tie_break) {
        std::cerr << r.trial_id << ": fraction tie, lowest limb kept\n";
      }
      std::cout << limbguard::format_detect_line(r) << '\n';
    }
    return kExitOk;
  }

  const auto summary = limbguard::run_evaluate(opt);
  for (int limb = 0; limb < 4; ++limb) {
    const auto& r = summary.rates[static_cast<std::size_t>(limb)];
    std::cout << "limb " << limb << ": specificity "
              << limbguard::numio::format(r.specificity) << " recall "
              << limbguard::numio::format(r.recall) << '\n';
  }
  std::cout << "artifacts in " << opt.out_dir.string() << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const limbguard::MissingModel& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitMissingArtifact;
  } catch (const limbguard::IoFailure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitMissingArtifact;
  } catch (const limbguard::DivergedLoss& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}
