// depcar: dependency-feature transactions, class association rules and a
// linear SVM baseline, with cross-validated evaluation.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "depcar/cli.hpp"

namespace {

using depcar::cli::Options;

void add_global_flags(CLI::App& app, Options& o) {
  app.add_option("--corpus", o.corpus, "Annotated corpus file");
  app.add_option("--format", o.format, "Corpus format: native | conllu")->capture_default_str();
  app.add_option("--tau", o.tau, "Feature reduction: stem | root")->capture_default_str();
  app.add_option("--strategy", o.strategy,
                 "head-only | nouns-dist1 | head-nouns:D | head-all-nouns | head-all-nouns-verbs | tfidf:N "
                 "(aliases I, II, III1..III3, IV, IV')")
      ->capture_default_str();
  app.add_option("--classifier", o.classifier, "car | svm | both")->capture_default_str();
  app.add_option("--level", o.level, "Evaluation level: document | sentence")->capture_default_str();
  app.add_option("--average", o.average, "AVG column and curves: weighted | macro")->capture_default_str();
  app.add_option("--rule-budget", o.rule_budget, "Maximum number of rules kept")->capture_default_str();
  app.add_option("--min-support", o.min_support, "Fix minimum support instead of tuning it");
  app.add_option("--min-confidence", o.min_confidence, "Fix minimum confidence instead of tuning it");
  app.add_option("--support-grid", o.support_grid, "Support values searched during tuning")->delimiter(',');
  app.add_option("--confidence-grid", o.confidence_grid, "Confidence values searched during tuning")
      ->delimiter(',');
  app.add_option("--max-itemset-size", o.max_itemset_size, "Cap on mined itemset size (default: automatic)");
  app.add_option("--lambda", o.lambda, "SVM regularization strength")->capture_default_str();
  app.add_option("--epochs", o.epochs, "SVM training epochs")->capture_default_str();
  app.add_option("--folds", o.folds, "Cross-validation folds")->capture_default_str();
  app.add_option("--stratified", o.stratified, "Stratify folds by class")->capture_default_str();
  app.add_option("--seed", o.seed, "Top-level random seed")->capture_default_str();
  app.add_option("--workers", o.workers, "Worker threads (results do not depend on it)");
  app.add_option("--pos-map", o.pos_map, "FINE<TAB>COARSE POS mapping overrides");
  app.add_option("--out-dir", o.out_dir, "Directory for output artifacts (default: stdout)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"depcar: dependency-syntax feature selection and class association rule text classification"};
  app.set_config("--config", "", "TOML/INI experiment config; command-line flags take precedence");
  app.require_subcommand(1);
  Options o;
  add_global_flags(app, o);
  app.fallthrough();

  auto* validate = app.add_subcommand("validate", "Check corpus well-formedness");
  auto* features = app.add_subcommand("features", "Dump strategy transactions");
  auto* mine = app.add_subcommand("mine", "Mine class association rules");
  mine->add_option("--transactions", o.transactions, "Read a transaction dump instead of a corpus");
  auto* evaluate = app.add_subcommand("evaluate", "Cross-validated evaluation");
  auto* sweep = app.add_subcommand("sweep", "Curves over tfidf N or rule count");
  sweep->add_option("--kind", o.sweep, "tfidf-n | rule-count")->capture_default_str();
  sweep->add_option("--n-min", o.n_min, "First tfidf N")->capture_default_str();
  sweep->add_option("--n-max", o.n_max, "Last tfidf N")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return depcar::cli::kUsage;
  }

  try {
    if (*validate) return depcar::cli::cmd_validate(o, std::cout, std::cerr);
    if (*features) return depcar::cli::cmd_features(o, std::cout, std::cerr);
    if (*mine) return depcar::cli::cmd_mine(o, std::cout, std::cerr);
    if (*evaluate) return depcar::cli::cmd_evaluate(o, std::cout, std::cerr);
    if (*sweep) return depcar::cli::cmd_sweep(o, std::cout, std::cerr);
  } catch (const depcar::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return depcar::cli::kDataViolation;
  } catch (const depcar::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return depcar::cli::kUsage;
  } catch (const depcar::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return depcar::cli::kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return depcar::cli::kUsage;
  }
  return depcar::cli::kUsage;
}
