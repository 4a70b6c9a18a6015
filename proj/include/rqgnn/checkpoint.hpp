#pragma once

#include "rqgnn/model.hpp"

#include <json.hpp>

#include <filesystem>

namespace rqgnn {

inline constexpr int kCheckpointVersion = 1;

/// {version, config:{F,d,q,K,kernel_id,scales,dropout},
///  params:{name:{shape,values}}, bn:{gamma,beta,running_mean,running_var}}
/// Values are row-major; doubles are printed in shortest round-trip form.
nlohmann::json checkpoint_to_json(const ModelParams& params);
ModelParams checkpoint_from_json(const nlohmann::json& doc);

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace rqgnn
