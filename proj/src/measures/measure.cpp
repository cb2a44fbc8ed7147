#include "bxrl/measures/measure.hpp"

#include <cmath>
#include <utility>

#include "bxrl/common/errors.hpp"

namespace bxrl::measures {
namespace {

json obs_json(const Observation& o) {
  json a = json::array();
  for (double v : o) a.push_back(v);
  return a;
}

Observation obs_from_json(const json& j) {
  if (!j.is_array() || j.size() != kObsSize) throw FormatError("observation must have 25 numbers");
  Observation o{};
  for (std::size_t i = 0; i < kObsSize; ++i) o[i] = j[i].get<double>();
  return o;
}

Action action_from_json(const json& j) {
  const std::string name = j.get<std::string>();
  const auto a = parse_action(name);
  if (!a) throw FormatError("unknown action '" + name + "'");
  return *a;
}

}  // namespace

std::string_view form_name(MeasureForm form) {
  switch (form) {
    case MeasureForm::MeanActionProb: return "mean_action_prob";
    case MeasureForm::ObservationContrast: return "observation_contrast";
    case MeasureForm::ActionContrast: return "action_contrast";
    case MeasureForm::WeightedCombination: return "weighted_combination";
  }
  return "?";
}

BehaviorMeasure BehaviorMeasure::mean_action_prob(ScenarioSet set) {
  set.validate();
  BehaviorMeasure m;
  m.form_ = MeasureForm::MeanActionProb;
  m.name_ = set.name;
  m.scenarios_ = std::move(set);
  m.compile();
  return m;
}

BehaviorMeasure BehaviorMeasure::observation_contrast(std::string name, const Observation& o_p,
                                                      const Observation& o_q, Action a) {
  BehaviorMeasure m;
  m.form_ = MeasureForm::ObservationContrast;
  m.name_ = std::move(name);
  m.o_p_ = o_p;
  m.o_q_ = o_q;
  m.a_p_ = a;
  m.a_q_ = a;
  m.compile();
  return m;
}

BehaviorMeasure BehaviorMeasure::action_contrast(std::string name, const Observation& o, Action a_p,
                                                 Action a_q) {
  BehaviorMeasure m;
  m.form_ = MeasureForm::ActionContrast;
  m.name_ = std::move(name);
  m.o_p_ = o;
  m.o_q_ = o;
  m.a_p_ = a_p;
  m.a_q_ = a_q;
  m.compile();
  return m;
}

BehaviorMeasure BehaviorMeasure::weighted_combination(std::string name, std::vector<double> coefficients,
                                                      std::vector<BehaviorMeasure> children,
                                                      double offset) {
  if (coefficients.size() != children.size())
    throw ContractError("weighted_combination: " + std::to_string(coefficients.size()) +
                        " coefficients for " + std::to_string(children.size()) + " measures");
  for (double c : coefficients)
    if (!std::isfinite(c)) throw ContractError("weighted_combination: coefficients must be finite");
  BehaviorMeasure m;
  m.form_ = MeasureForm::WeightedCombination;
  m.name_ = std::move(name);
  m.coefficients_ = std::move(coefficients);
  m.children_ = std::make_shared<const std::vector<BehaviorMeasure>>(std::move(children));
  m.offset_ = offset;
  m.compile();
  return m;
}

BehaviorMeasure BehaviorMeasure::constant(std::string name, double value) {
  return weighted_combination(std::move(name), {}, {}, value);
}

policy::Var BehaviorMeasure::build(policy::Functional& f) const {
  switch (form_) {
    case MeasureForm::MeanActionProb: {
      std::vector<policy::Var> terms;
      std::vector<double> weights;
      for (const ScenarioEntry& e : scenarios_.entries) {
        terms.push_back(f.prob(f.add_observation(e.obs), e.action));
        weights.push_back(e.weight);
      }
      return f.weighted_sum(terms, weights);
    }
    case MeasureForm::ObservationContrast: {
      const int p = f.add_observation(o_p_);
      const int q = f.add_observation(o_q_);
      return f.prob(p, a_p_) - f.prob(q, a_q_);
    }
    case MeasureForm::ActionContrast: {
      const int o = f.add_observation(o_p_);
      return f.prob(o, a_p_) - f.prob(o, a_q_);
    }
    case MeasureForm::WeightedCombination: {
      std::vector<policy::Var> terms;
      for (const BehaviorMeasure& c : *children_) terms.push_back(c.build(f));
      policy::Var sum = f.weighted_sum(terms, coefficients_);
      return offset_ == 0.0 ? sum : sum + offset_;
    }
  }
  throw ContractError("unknown measure form");
}

void BehaviorMeasure::compile() {
  if (!children_) children_ = std::make_shared<const std::vector<BehaviorMeasure>>();
  auto f = std::make_shared<policy::Functional>();
  f->set_output(build(*f));
  compiled_ = std::move(f);
}

double BehaviorMeasure::evaluate(const policy::PolicyParams& params) const {
  return compiled_->evaluate(params);
}

policy::GradVector BehaviorMeasure::gradient(const policy::PolicyParams& params) const {
  return policy::grad_scalar(params, *compiled_);
}

double BehaviorMeasure::value_and_gradient(const policy::PolicyParams& params,
                                           policy::GradVector& grad) const {
  return policy::value_and_grad(params, *compiled_, grad);
}

json BehaviorMeasure::to_json() const {
  json j{{"form", form_name(form_)}, {"name", name_}};
  switch (form_) {
    case MeasureForm::MeanActionProb:
      j["scenarios"] = scenario_to_json(scenarios_);
      break;
    case MeasureForm::ObservationContrast:
      j["o_p"] = obs_json(o_p_);
      j["o_q"] = obs_json(o_q_);
      j["action"] = action_name(a_p_);
      break;
    case MeasureForm::ActionContrast:
      j["obs"] = obs_json(o_p_);
      j["a_p"] = action_name(a_p_);
      j["a_q"] = action_name(a_q_);
      break;
    case MeasureForm::WeightedCombination: {
      json terms = json::array();
      for (std::size_t i = 0; i < coefficients_.size(); ++i)
        terms.push_back({{"coef", coefficients_[i]}, {"measure", (*children_)[i].to_json()}});
      j["terms"] = std::move(terms);
      j["offset"] = offset_;
      break;
    }
  }
  return j;
}

BehaviorMeasure BehaviorMeasure::from_json(const json& j, const std::filesystem::path& base_dir) {
  try {
    const std::string form = j.at("form").get<std::string>();
    const std::string name = j.value("name", form);
    if (form == "mean_action_prob") {
      ScenarioSet set = j.contains("scenario_file")
                            ? load_scenarios(base_dir / j.at("scenario_file").get<std::string>())
                            : scenario_from_json(j.at("scenarios"));
      if (j.contains("name")) set.name = name;
      return mean_action_prob(std::move(set));
    }
    if (form == "observation_contrast")
      return observation_contrast(name, obs_from_json(j.at("o_p")), obs_from_json(j.at("o_q")),
                                  action_from_json(j.at("action")));
    if (form == "action_contrast")
      return action_contrast(name, obs_from_json(j.at("obs")), action_from_json(j.at("a_p")),
                             action_from_json(j.at("a_q")));
    if (form == "weighted_combination") {
      std::vector<double> coefs;
      std::vector<BehaviorMeasure> children;
      for (const json& t : j.value("terms", json::array())) {
        coefs.push_back(t.at("coef").get<double>());
        children.push_back(from_json(t.at("measure"), base_dir));
      }
      return weighted_combination(name, std::move(coefs), std::move(children), j.value("offset", 0.0));
    }
    throw FormatError("unknown measure form '" + form + "'");
  } catch (const json::exception& e) {
    throw FormatError(std::string("measure file: ") + e.what());
  }
}

BehaviorMeasure load_measure_file(const std::filesystem::path& path) {
  const json j = read_json_file(path);
  if (j.is_object() && j.contains("form")) return BehaviorMeasure::from_json(j, path.parent_path());
  if (j.is_object() && j.contains("entries")) return BehaviorMeasure::mean_action_prob(scenario_from_json(j));
  throw FormatError(path.string() + ": neither a scenario file nor a measure file");
}

void save_measure_file(const std::filesystem::path& path, const BehaviorMeasure& measure) {
  write_json_file(path, measure.to_json());
}

}  // namespace bxrl::measures
