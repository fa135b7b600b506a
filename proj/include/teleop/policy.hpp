#pragma once

#include "teleop/datalog.hpp"
#include "teleop/kinematics.hpp"

#include <deque>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace teleop {

enum class FeatureMap { linear, poly2 };
enum class EnsembleMode { uniform, exponential };

struct PolicyConfig {
    int chunk_size = 50;
    bool include_force = true;
    FeatureMap feature_map = FeatureMap::poly2;
    double ridge_lambda = 1e-3;
    EnsembleMode ensemble_mode = EnsembleMode::uniform;
    double ensemble_m = 0.1;
    int obs_history_len = 1;
    // normalized features are clipped to +-feature_clip at inference
    double feature_clip = 4.0;

    void validate() const;
};

struct Observation {
    JointPositions q;
    JointTorques tau_ext;
};

struct TrainingSet {
    Eigen::MatrixXd features;  // normalized raw features, one row per example
    Eigen::MatrixXd targets;   // flattened chunks, row-major k x n per row
    Eigen::VectorXd mean;
    Eigen::VectorXd scale;
    int dof = 0;
};

// Raw (unnormalized) observation features at tick t of a record.
Eigen::VectorXd raw_features(const std::vector<Observation>& history, std::size_t t, const PolicyConfig& cfg);

TrainingSet build_dataset(const std::vector<const DemonstrationRecord*>& records, const PolicyConfig& cfg);
TrainingSet build_dataset(const Dataset& ds, const PolicyConfig& cfg);

struct ActionChunk {
    Eigen::MatrixXd actions;  // k x n
    long issued_at = 0;
};

struct ChunkPredictor {
    PolicyConfig cfg;
    int dof = 0;
    Eigen::VectorXd mean, scale;      // raw feature normalization
    Eigen::VectorXd mapped_mean;      // centering of the mapped features
    Eigen::VectorXd bias;             // target mean, length k n
    Eigen::MatrixXd weights;          // mapped_dim x (k n)
    Eigen::VectorXd lower, upper;     // joint limits used for clamping

    int input_dim() const { return static_cast<int>(mean.size()); }
    // history holds observations up to and including the current tick (latest last)
    ActionChunk predict(const std::vector<Observation>& history, long tick) const;
    ActionChunk predict(const Observation& obs, long tick) const;
};

Eigen::MatrixXd map_features(const Eigen::MatrixXd& z, FeatureMap map);

ChunkPredictor fit(const TrainingSet& data, const PolicyConfig& cfg, const KinematicChain& chain);

nlohmann::json predictor_to_json(const ChunkPredictor& p);
ChunkPredictor predictor_from_json(const nlohmann::json& j);
void save_predictor(const ChunkPredictor& p, const std::filesystem::path& path);
ChunkPredictor load_predictor(const std::filesystem::path& path);
nlohmann::json policy_config_to_json(const PolicyConfig& c);
PolicyConfig policy_config_from_json(const nlohmann::json& j);

class EnsembleBuffer {
public:
    explicit EnsembleBuffer(int chunk_size) : k_(chunk_size) {}

    void push(ActionChunk c);
    // Drops chunks that no longer cover tick.
    void evict(long tick);
    const std::deque<ActionChunk>& chunks() const { return chunks_; }
    int chunk_size() const { return k_; }

private:
    int k_;
    std::deque<ActionChunk> chunks_;
};

JointPositions temporal_ensemble(const EnsembleBuffer& buf, long tick, const PolicyConfig& cfg);

}  // namespace teleop
