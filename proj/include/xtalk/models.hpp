#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xtalk/phase_sampling.hpp"

namespace xtalk {

// All coefficients are in pm/pi; predictors divide phases (rad) by pi.

enum class ModelKind { Tpm, Thdm, Lr };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);  // InputError if unknown
inline constexpr ModelKind kAllModels[] = {ModelKind::Tpm, ModelKind::Thdm, ModelKind::Lr};

struct TpmParams {
  double s = 0.0;  // pm/pi
};

struct ThdmParams {
  double p1 = 0.0;  // pm/pi
  double p2 = 1.0;  // 1/mm
  double p3 = 0.0;  // pm/(pi mm)
  double p4 = 0.0;  // pm/pi
};

struct LrParams {
  std::vector<double> weights;  // pm/pi, aligned with the training ring's PUCs
  double regularization = 0.0;  // absolute ridge lambda
};

// Per-PUC ThDM coefficient p1 e^{-p2 d} + p3 d + p4.
double thdm_coefficient(const ThdmParams& p, double distance_mm);

double predict_tpm(const TpmParams& p, std::span<const double> phases);
double predict_thdm(const ThdmParams& p, std::span<const double> phases,
                    std::span<const double> distances);
double predict_lr(const LrParams& p, std::span<const double> phases);

Eigen::VectorXd predict_tpm(const TpmParams& p, const Eigen::MatrixXd& phases);
Eigen::VectorXd predict_thdm(const ThdmParams& p, const Eigen::MatrixXd& phases,
                             std::span<const double> distances);
Eigen::VectorXd predict_lr(const LrParams& p, const Eigen::MatrixXd& phases);

struct ThdmOptions {
  double p2_min = 0.01;  // 1/mm
  double p2_max = 10.0;
  std::size_t p2_points = 60;
  double rel_tol = 1e-4;
};

// 25 log-spaced values in [1e-6, 1e3]; multiplied by mean diag(X^T X).
std::vector<double> default_lambda_grid();

struct LrOptions {
  std::vector<double> lambda_grid = default_lambda_grid();  // relative; 0 allowed
  std::size_t folds = 5;
  std::uint64_t fold_seed = 5;
};

void validate(const ThdmOptions& opts);
void validate(const LrOptions& opts);

struct CvPoint {
  double lambda_rel = 0.0;
  double lambda = 0.0;
  double rmse = 0.0;  // mean validation RMSE over folds, pm
};

struct ProfilePoint {
  double p2 = 0.0;
  double rmse = 0.0;  // training RMSE with the linear parameters profiled out, pm
};

// Fit artefact: parameters plus the diagnostics reported with them.
struct FittedModel {
  ModelKind kind = ModelKind::Tpm;
  std::string ring_id;
  TpmParams tpm;
  ThdmParams thdm;
  LrParams lr;
  std::vector<int> puc_ids;
  std::vector<double> distances;  // training ring, mm

  double train_rmse = 0.0;
  std::optional<double> test_rmse;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::vector<CvPoint> cv_curve;
  std::vector<ProfilePoint> p2_profile;
  std::vector<std::string> flags;
  std::uint64_t fold_seed = 0;

  bool has_flag(const std::string& f) const;
};

// Inputs: training rows plus the distance table of their PUC columns.
FittedModel fit_tpm(const SampleSet& train);
FittedModel fit_thdm(const SampleSet& train, std::span<const double> distances,
                     const ThdmOptions& opts = {});
FittedModel fit_lr(const SampleSet& train, const LrOptions& opts = {});

// Ridge solution for one absolute lambda (0 = minimum-norm least squares).
LrParams ridge_solve(const Eigen::MatrixXd& x_over_pi, const Eigen::VectorXd& y, double lambda);

// Phases of an arbitrary ring with its own distance table. LR requires the
// column count it was trained on.
Eigen::VectorXd predict(const FittedModel& m, const Eigen::MatrixXd& phases,
                        std::span<const double> distances);
double predict_one(const FittedModel& m, std::span<const double> phases,
                   std::span<const double> distances);

struct ModelSettings {
  ThdmOptions thdm;
  LrOptions lr;
};

// Fit on the dataset's train split and score the test split.
FittedModel fit_model(ModelKind kind, const Dataset& ds, const ModelSettings& settings = {});

nlohmann::ordered_json to_json(const FittedModel& m);
FittedModel model_from_json(const nlohmann::json& j);
void write_model(const std::filesystem::path& path, const FittedModel& m);
FittedModel read_model(const std::filesystem::path& path);

}  // namespace xtalk
