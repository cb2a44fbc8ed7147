#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "bxrl/measures/scenario.hpp"
#include "bxrl/policy/functional.hpp"

namespace bxrl::measures {

enum class MeasureForm { MeanActionProb, ObservationContrast, ActionContrast, WeightedCombination };

std::string_view form_name(MeasureForm form);

// Scalar behavior measure m(pi). Immutable once built; the expression tape is
// compiled at construction and shared between copies.
//
//   mean_action_prob      sum_i w_i pi(a_i | o_i) over a scenario set
//   observation_contrast  pi(a | o_P) - pi(a | o_Q)
//   action_contrast       pi(a_P | o) - pi(a_Q | o)
//   weighted_combination  offset + sum_j c_j m_j
class BehaviorMeasure {
 public:
  static BehaviorMeasure mean_action_prob(ScenarioSet set);
  static BehaviorMeasure observation_contrast(std::string name, const Observation& o_p,
                                              const Observation& o_q, Action a);
  static BehaviorMeasure action_contrast(std::string name, const Observation& o, Action a_p, Action a_q);
  static BehaviorMeasure weighted_combination(std::string name, std::vector<double> coefficients,
                                              std::vector<BehaviorMeasure> children,
                                              double offset = 0.0);
  static BehaviorMeasure constant(std::string name, double value);

  const std::string& name() const { return name_; }
  MeasureForm form() const { return form_; }
  const ScenarioSet& scenarios() const { return scenarios_; }
  const std::vector<double>& coefficients() const { return coefficients_; }
  const std::vector<BehaviorMeasure>& children() const { return *children_; }

  // Appends this measure's observations and nodes to `f`.
  policy::Var build(policy::Functional& f) const;
  const policy::Functional& functional() const { return *compiled_; }

  double evaluate(const policy::PolicyParams& params) const;
  policy::GradVector gradient(const policy::PolicyParams& params) const;
  double value_and_gradient(const policy::PolicyParams& params, policy::GradVector& grad) const;

  // Form-tagged JSON. Mean-action-prob measures embed their scenario set.
  json to_json() const;
  // Accepts "scenarios" inline or "scenario_file" resolved against base_dir.
  static BehaviorMeasure from_json(const json& j, const std::filesystem::path& base_dir = {});

 private:
  BehaviorMeasure() = default;
  void compile();

  MeasureForm form_ = MeasureForm::WeightedCombination;
  std::string name_;
  ScenarioSet scenarios_;
  Observation o_p_{};
  Observation o_q_{};
  Action a_p_ = Action::Idle;
  Action a_q_ = Action::Idle;
  std::vector<double> coefficients_;
  std::shared_ptr<const std::vector<BehaviorMeasure>> children_;
  double offset_ = 0.0;
  std::shared_ptr<const policy::Functional> compiled_;
};

// Either a scenario file (read as mean_action_prob) or a form-tagged measure.
BehaviorMeasure load_measure_file(const std::filesystem::path& path);
void save_measure_file(const std::filesystem::path& path, const BehaviorMeasure& measure);

// The collision measure: one third each of the mean pi(LEFT), pi(RIGHT) and
// pi(FASTER) over two bundled crash scenarios per action.
BehaviorMeasure collision_measure_fixture();
// The six bundled scenarios as one set with weights 1/6 (same value as the
// fixture measure up to rounding).
ScenarioSet collision_fixture_scenarios();

}  // namespace bxrl::measures
