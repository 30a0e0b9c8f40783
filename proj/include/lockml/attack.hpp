/*!
  \file attack.hpp
  \brief End-to-end key prediction attacks and key prediction accuracy.

  An attack runs in stages: setup (lock the target, key goes to a sidecar),
  dataset (self-referencing relocks or generalised training set), model
  (train or evolve), deploy (predict one bit per key input) and score.
  When an artifact directory is given every stage writes into its own
  subdirectory:

      setup/target.bench    setup/locked.bench
      truth/lockrecord.json (read only by the score stage)
      dataset/train/        dataset/test/
      model/model.lmm       model/evolution.jsonl (cnn-evolved only)
      deploy/prediction.json
      report.json
*/

#pragma once

#include "lockml/ann.hpp"
#include "lockml/dataset.hpp"
#include "lockml/neuroevo.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace lockml
{

/*! \brief Error raised inside a pipeline stage; keeps the original kind. */
class StageError : public Error
{
public:
  StageError( std::string stage, const Error& cause )
      : Error( cause.kind(), stage + ": " + cause.what() ), stage_( std::move( stage ) )
  {
  }

  const std::string& stage() const noexcept { return stage_; }

private:
  std::string stage_;
};

enum class ModelKind
{
  mlp,
  cnn_fixed,
  cnn_evolved
};

std::string_view to_string( ModelKind kind );
ModelKind model_kind_from_string( std::string_view name );

struct AttackConfig
{
  /*! key length K of the attacked target */
  std::size_t key_bits = 32;
  /*! SRS: number of relocked copies N */
  std::size_t relocks = 300;
  /*! SRS: bits added per relock; 0 means key_bits */
  std::size_t relock_bits = 0;
  /*! GSS: locked copies per training netlist */
  std::size_t locks = 200;
  ModelKind model = ModelKind::mlp;
  /*! training epochs of the deployed model */
  std::size_t epochs = 100;
  std::size_t batch = 128;
  EvolutionConfig evolution;
  /*! cnn-evolved: retrain the winning architecture for `epochs` instead of deploying the GA model */
  bool retrain = true;
  PipelineOptions pipeline;
  std::uint64_t seed = 0;

  void check() const;
};

nlohmann::json to_json( const AttackConfig& config );
/*! Unknown keys raise Error("config-schema"). */
AttackConfig attack_config_from_json( const nlohmann::json& j );
AttackConfig read_attack_config( const std::filesystem::path& path );

/*! \brief Percentage of positions where the keys agree. */
double kpa( const Key& predicted, const Key& actual );

struct Deployment
{
  Key key;
  std::vector<Prediction> predictions;
};

/*! \brief Predicts every key bit of `target` (already in its post-locking form) independently. */
Deployment deploy( const Network<float>& model, const Netlist& target, const ExtractionParams& params );

struct AttackModel
{
  Network<float> network;
  /*! kind, spec, parameter count, training summary */
  nlohmann::json identity;
};

/*! \brief Builds and trains (or evolves) the configured model on `train`. */
AttackModel fit_model( const LabeledDataset& train, Scenario scenario, const AttackConfig& config,
                       const std::optional<std::filesystem::path>& log_dir = std::nullopt );

struct AttackReport
{
  Scenario scenario = Scenario::srs;
  std::string target;
  Scheme scheme = Scheme::epic;
  Key predicted;
  /*! probability of bit value 1 per key bit */
  std::vector<double> probabilities;
  std::optional<Key> truth;
  std::optional<double> kpa;
  nlohmann::json model = nlohmann::json::object();
  std::size_t training_vectors = 0;
  std::uint64_t seed = 0;
  std::map<std::string, double> timing;
};

/*! \brief JSON form; timing is omitted when `with_timing` is false so reruns compare equal. */
nlohmann::json to_json( const AttackReport& report, bool with_timing = true );

/*! \brief Locks `target`, relocks the locked copy N times, learns and predicts the withheld key. */
AttackReport run_srs_attack( const NamedNetlist& target, const AttackConfig& config,
                             const std::optional<std::filesystem::path>& artifacts = std::nullopt );

/*! \brief Learns from locked copies of `train` and predicts the key of a locked `target`. */
AttackReport run_gss_attack( const std::vector<NamedNetlist>& train, const NamedNetlist& target,
                             const AttackConfig& config,
                             const std::optional<std::filesystem::path>& artifacts = std::nullopt );

} // namespace lockml
