#pragma once

#include <functional>
#include <string>
#include <vector>

namespace roughkit::suite {

enum class Relation { at_most, at_least, holds };

struct CheckRow {
  std::string name;
  double value = 0.0;
  double bound = 0.0;
  Relation relation = Relation::at_most;
  bool pass = false;
  bool known_failure = false;  // reported, not fatal
};

struct CriterionResult {
  int id = 0;
  std::string title;
  double budget_s = 0.0;
  double seconds = 0.0;  // wall clock, never written to CSV
  std::vector<CheckRow> rows;
  std::string error;  // exception text when the criterion could not run

  bool pass() const;          // every row, known failures included
  bool fatal_failure() const; // a failing row that is not a known failure, or an error
};

const char* to_string(Relation r);

CriterionResult young_limit();           // 1
CriterionResult chen_relations();        // 2
CriterionResult sewing_bounds();         // 3
CriterionResult nonlinear_bound();       // 4
CriterionResult integral_equivalence();  // 5
CriterionResult rde_oracles();           // 6
CriterionResult flow_invariants();       // 7
CriterionResult rpde_identity();         // 8
CriterionResult uniqueness();            // 9

struct Criterion {
  int id;
  std::function<CriterionResult()> run;
};
std::vector<Criterion> criteria();

// Runs one criterion, timing it and converting exceptions into an error entry.
CriterionResult run_timed(const Criterion& c);

}  // namespace roughkit::suite
