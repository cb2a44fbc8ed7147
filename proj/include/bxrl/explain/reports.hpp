#pragma once

#include <cstddef>
#include <string>

#include "bxrl/common/json_io.hpp"
#include "bxrl/explain/counterfactual.hpp"
#include "bxrl/explain/influence.hpp"
#include "bxrl/explain/shapley.hpp"

namespace bxrl::explain {

json to_json(const InfluenceReport& r);
// record,epoch,t,score
std::string to_csv(const InfluenceReport& r);
// Fixed-width table of the k largest |scores|.
std::string top_k_table(const InfluenceReport& r, std::size_t k);

json to_json(const ShapleyReport& r);
// feature,phi
std::string to_csv(const ShapleyReport& r);
std::string top_k_table(const ShapleyReport& r, std::size_t k);

// Excludes the parameter vector; the caller saves it as a checkpoint.
json to_json(const CounterfactualResult& r);
// step,segment,objective,measure,kl_pivot,kl_origin,step_size
std::string trace_csv(const CounterfactualResult& r);

}  // namespace bxrl::explain
