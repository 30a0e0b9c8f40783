/*!
  \file dataset.hpp
  \brief Training and test sets for the generalized (GSS) and self-referencing (SRS) scenarios.

  GSS locks many netlists other than the target; SRS relocks copies of the
  locked target and learns from the additional key inputs only. Every vector
  carries its provenance so leakage between the two sides can be audited.
*/

#pragma once

#include "lockml/extraction.hpp"
#include "lockml/locking.hpp"
#include "lockml/transform.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace lockml
{

enum class Scenario
{
  gss,
  srs
};

std::string_view to_string( Scenario scenario );
Scenario scenario_from_string( std::string_view name );

struct Provenance
{
  std::string netlist;
  Scheme scheme = Scheme::epic;
  std::uint64_t seed = 0;
  /*! Key input index in the netlist the vector was extracted from. */
  std::size_t key_index = 0;

  bool operator==( const Provenance& ) const = default;
};

struct LabeledDataset
{
  Scenario scenario = Scenario::gss;
  std::size_t vector_length = 400;
  /*! False for attack-side vectors whose key bits are unknown. */
  bool labeled = true;
  /*! One row per vector, codes 0..9 already fitted to vector_length. */
  std::vector<std::vector<std::uint8_t>> codes;
  std::vector<std::uint8_t> labels;
  std::vector<Provenance> provenance;
  /*! Generation settings recorded in the manifest. */
  nlohmann::json info = nlohmann::json::object();

  std::size_t size() const noexcept { return codes.size(); }
  /*! Formatted (normalized) values of row i. */
  std::vector<float> formatted( std::size_t i ) const;
  void append( const LocalityVector& v, Provenance p );
  /*! Fraction of label-1 vectors. */
  double balance() const;
};

/*! \brief How each locked copy is turned into localities. */
struct PipelineOptions
{
  ExtractionParams extraction;
  Scheme scheme = Scheme::epic;
  bool optimize = true;
  std::vector<Pass> passes = default_passes();
  std::size_t jobs = 1;
  /*! SRS: drop localities whose key gate also carries one of the target's own key inputs */
  bool skip_shared_key_gates = true;
};

/*! \brief Post-locking steps applied to every copy: optional optimization, then generic form. */
Netlist prepare_locked( const Netlist& locked, const PipelineOptions& options );

struct NamedNetlist
{
  std::string id;
  Netlist netlist;
};

/*! \brief |train| · locks · key_bits labelled vectors; throws "target-leakage" when an id equals `target_id`. */
LabeledDataset gen_gss( const std::vector<NamedNetlist>& train, std::string_view target_id, std::size_t locks,
                        std::size_t key_bits, std::uint64_t seed, const PipelineOptions& options );

struct SrsData
{
  LabeledDataset train;
  /*! Unlabelled localities of the target's original key inputs, in key order. */
  LabeledDataset test;
};

/*! \brief copies · key_bits training vectors from relocked copies of the target.
 *
 * Only key inputs added by relocking contribute training vectors; the
 * record is used for its key width and scheme, never for labels.
 */
SrsData gen_srs( const Netlist& target_locked, const LockRecord& record, std::size_t copies, std::size_t key_bits,
                 std::uint64_t seed, const PipelineOptions& options, const std::string& target_id = "target" );

/*! \brief Stratified split; `fraction` of each label goes to the first part. */
std::pair<LabeledDataset, LabeledDataset> split( const LabeledDataset& dataset, double fraction, std::uint64_t seed );

/*! \brief Directory with manifest.json, data.csv and provenance.csv. */
void save_dataset( const LabeledDataset& dataset, const std::filesystem::path& dir );
LabeledDataset load_dataset( const std::filesystem::path& dir );

nlohmann::json to_json( const ExtractionParams& params );
ExtractionParams extraction_params_from_json( const nlohmann::json& j );

} // namespace lockml
