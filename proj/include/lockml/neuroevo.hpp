/*!
  \file neuroevo.hpp
  \brief Genetic search over the internal layers of the CNN.

  A genotype has 7 presence bits followed by 7 type bits. Slot i contributes
  a layer when presence bit i is set; type bit i selects conv (1) or pool (0).
  Genotypes that decode to the same layer list share one fitness evaluation.
*/

#pragma once

#include "lockml/ann.hpp"
#include "lockml/dataset.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace lockml
{

inline constexpr std::size_t max_internal_layers = 7;
inline constexpr std::size_t genotype_length = 2 * max_internal_layers;

struct Genotype
{
  std::array<std::uint8_t, genotype_length> bits{};

  /*! e.g. "0111101 0111110" (presence, space, types) */
  std::string to_string() const;
  /*! Accepts 14 binary digits, optionally with spaces. */
  static Genotype from_string( std::string_view text );
  static Genotype from_index( std::uint32_t index );
  bool operator==( const Genotype& ) const = default;
};

CnnArchitecture decode( const Genotype& genotype );

/*! \brief Distinct architectures over all 2^14 genotypes, ordered by key. */
std::vector<CnnArchitecture> enumerate_architectures();

enum class FitnessMode
{
  /*! accuracy on the data the network was trained on */
  train_set,
  /*! accuracy on a stratified holdout split */
  holdout
};

struct EvolutionConfig
{
  std::size_t population = 10;
  std::size_t generations = 20;
  double mutation_rate = 0.1;
  double crossover_rate = 0.9;
  std::size_t tournament = 3;
  bool elitism = true;
  std::size_t epochs = 44;
  std::size_t batch = 128;
  FitnessMode fitness_mode = FitnessMode::train_set;
  double holdout_fraction = 0.2;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  void check() const;
};

nlohmann::json to_json( const EvolutionConfig& config );
EvolutionConfig evolution_config_from_json( const nlohmann::json& j );

/*! Tournament winner: highest fitness, then fewer internal layers, then lowest index. Invalid entries never win
 *  against valid ones. */
std::size_t tournament_select( const std::vector<std::optional<double>>& fitness,
                               const std::vector<Genotype>& population, std::size_t size, Rng& rng );
std::pair<Genotype, Genotype> two_point_crossover( const Genotype& a, const Genotype& b, Rng& rng );
Genotype mutate( const Genotype& g, double rate, Rng& rng );

struct FitnessOutcome
{
  double kpa = 0.0;
  std::size_t epochs = 0;
  std::optional<Network<float>> model;
};

/*! Trains and scores one architecture; throwing marks the fitness invalid. */
using FitnessFunction = std::function<FitnessOutcome( const CnnArchitecture&, std::uint64_t seed )>;

/*! \brief Default fitness: build_cnn(arch), train `epochs`, KPA on the training set or a holdout. */
FitnessFunction cnn_fitness( const LabeledDataset& data, const EvolutionConfig& config );

struct Evaluation
{
  std::size_t generation = 0;
  Genotype genotype;
  std::string architecture;
  std::optional<double> fitness;
  std::size_t epochs = 0;
  double seconds = 0.0;
  bool cached = false;
  std::string error;
};

nlohmann::json to_json( const Evaluation& e );

struct GenerationStats
{
  double best = 0.0;
  double mean = 0.0;
  double best_ever = 0.0;
};

struct EvolutionResult
{
  Genotype best;
  CnnArchitecture architecture;
  double best_fitness = 0.0;
  std::optional<Network<float>> model;
  std::vector<GenerationStats> history;
  std::vector<Evaluation> log;
  std::size_t evaluations = 0;
  std::size_t trainings = 0;
};

/*! \brief Generational GA; `on_evaluation` sees every log record as it is produced. */
EvolutionResult evolve( const FitnessFunction& fitness, const EvolutionConfig& config,
                        const std::function<void( const Evaluation& )>& on_evaluation = {} );

EvolutionResult evolve( const LabeledDataset& data, const EvolutionConfig& config,
                        const std::function<void( const Evaluation& )>& on_evaluation = {} );

} // namespace lockml
