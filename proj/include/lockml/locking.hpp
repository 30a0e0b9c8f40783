/*!
  \file locking.hpp
  \brief XOR/XNOR key-gate insertion.

  EPIC locking inserts an XOR for key bit 0 and an XNOR for key bit 1 on
  randomly chosen wires. The unbiased variant draws the gate type
  independently of the key bit; it is functionally incorrect on purpose and
  serves as a learning-resilience control. In both schemes the chosen wires
  depend only on the seed, never on the key.

  Every key gate has the key input on fanin pin 0 and the locked wire on pin 1.
*/

#pragma once

#include "lockml/netlist.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace lockml
{

enum class Scheme
{
  epic,
  unbiased
};

std::string_view to_string( Scheme scheme );
Scheme scheme_from_string( std::string_view name );

struct LockRecord
{
  /*! Bits for key inputs key_offset .. key_offset + key.size() - 1. */
  Key key;
  std::vector<GateId> key_gate_ids;
  std::vector<std::string> key_gate_names;
  Scheme scheme = Scheme::epic;
  std::uint64_t seed = 0;
  /*! Number of key inputs that existed before this locking step. */
  std::size_t key_offset = 0;
};

Key keygen( std::size_t length, std::uint64_t seed );

using LockResult = std::pair<Netlist, LockRecord>;

LockResult lock_epic( const Netlist& netlist, const Key& key, std::uint64_t seed );
LockResult lock_unbiased( const Netlist& netlist, const Key& key, std::uint64_t seed );
LockResult lock( const Netlist& netlist, const Key& key, std::uint64_t seed, Scheme scheme );

/*! \brief Adds key2.size() further key gates to an already locked netlist.
 *
 * New key inputs continue the existing numbering. Unlike the initial
 * locking, wires driven by existing key gates are eligible locations.
 */
LockResult relock( const Netlist& locked, const Key& key2, std::uint64_t seed, Scheme scheme );
/*! \brief Same as above, taking the scheme from the prior record. */
LockResult relock( const Netlist& locked, const LockRecord& prior, const Key& key2, std::uint64_t seed );

/*! \brief Wires eligible for key-gate insertion, in ascending id order. */
std::vector<GateId> lock_candidates( const Netlist& netlist, bool allow_key_gate_outputs );

std::string to_json( const LockRecord& record );
LockRecord lock_record_from_json( const std::string& text );
void write_lock_record( const LockRecord& record, const std::filesystem::path& path );
LockRecord read_lock_record( const std::filesystem::path& path );

} // namespace lockml
