#ifndef CFSLAB_JSON_IO_HPP
#define CFSLAB_JSON_IO_HPP

#include <string>

#include "cfslab/core.hpp"
#include "json.hpp"

namespace cfslab {

using Json = nlohmann::ordered_json;

Json system_to_json(const DiscreteSystem& sys);
DiscreteSystem system_from_json(const Json& j);

DiscreteSystem load_system(const std::string& path);
void save_system(const DiscreteSystem& sys, const std::string& path);

Json complex_to_json(const cplx& z);
Json matrix_to_json(const Mat& m);
Mat matrix_from_json(const Json& j);

}  // namespace cfslab

#endif
