/*!
  \file netlist.hpp
  \brief Gate-level netlist data model.

  A netlist is a vector of gate slots indexed by GateId. Primary inputs, key
  inputs and flip-flops are gates as well; primary outputs are references to
  driving gates. Removed gates keep their slot until compacted() is called,
  so ids stay stable during a rewrite.
*/

#pragma once

#include "lockml/common.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lockml
{

enum class GateType : std::uint8_t
{
  Not,
  And,
  Nand,
  Or,
  Xor,
  Nor,
  Xnor,
  Buf,
  Dff,
  Input,
  KeyInput,
  Output,
  Const0,
  Const1
};

std::string_view to_string( GateType type );

/*! \brief Parses a bench gate keyword (case-insensitive, BUFF accepted for BUF). */
std::optional<GateType> gate_type_from_keyword( std::string_view keyword );

/*! \brief True for the eight combinational logic types NOT..BUF. */
constexpr bool is_logic( GateType t ) noexcept
{
  return t <= GateType::Buf;
}

constexpr bool is_source( GateType t ) noexcept
{
  return t == GateType::Input || t == GateType::KeyInput || t == GateType::Const0 || t == GateType::Const1;
}

constexpr bool is_constant( GateType t ) noexcept
{
  return t == GateType::Const0 || t == GateType::Const1;
}

constexpr bool is_unary( GateType t ) noexcept
{
  return t == GateType::Not || t == GateType::Buf || t == GateType::Dff;
}

using GateId = std::uint32_t;
inline constexpr GateId no_gate = static_cast<GateId>( -1 );

struct Gate
{
  std::string name;
  GateType type = GateType::Buf;
  std::vector<GateId> fanin;
  /*! One entry per (consumer, pin) edge; order is insertion order. */
  std::vector<GateId> fanout;
  bool removed = false;
};

/*! \brief Ordered key bits; bit i drives key input i. */
struct Key
{
  std::vector<std::uint8_t> bits;

  Key() = default;
  explicit Key( std::vector<std::uint8_t> b ) : bits( std::move( b ) ) {}

  std::size_t size() const noexcept { return bits.size(); }
  bool operator[]( std::size_t i ) const { return bits[i] != 0; }
  bool operator==( const Key& ) const = default;

  /*! \brief "0110..." with bit 0 first. */
  std::string to_string() const;
  static Key from_string( std::string_view text );
};

class Netlist
{
public:
  Netlist() = default;

  /*! \brief Builds a netlist from raw slots without any consistency checks.
   *
   * Used to hand malformed graphs to validate(); regular code uses the
   * add_* builders.
   */
  static Netlist from_raw( std::vector<Gate> gates, std::vector<GateId> primary_inputs,
                           std::vector<GateId> key_inputs, std::vector<GateId> primary_outputs );

  GateId add_input( std::string name );
  GateId add_key_input( std::string name );
  GateId add_gate( std::string name, GateType type, std::vector<GateId> fanin );
  void add_output( GateId driver );

  void set_fanin( GateId gate, std::size_t pin, GateId source );
  void set_fanins( GateId gate, std::vector<GateId> fanin );
  void set_type( GateId gate, GateType type );
  /*! \brief Moves every consumer pin and output reference of `from` onto `to`. */
  void redirect( GateId from, GateId to );
  /*! \brief Deletes a gate that has no consumers and drives no output. */
  void remove( GateId gate );
  /*! \brief Turns key input `index` into a constant driver and drops it from the key list. */
  void fix_key_input( std::size_t index, bool value );

  /*! \brief Copy with removed slots dropped; relative id order is preserved. */
  Netlist compacted() const;

  std::size_t slot_count() const noexcept { return gates_.size(); }
  /*! \brief Number of live gates that are not inputs or constants. */
  std::size_t gate_count() const;
  const Gate& gate( GateId id ) const { return gates_[id]; }
  bool alive( GateId id ) const { return id < gates_.size() && !gates_[id].removed; }

  const std::vector<GateId>& primary_inputs() const noexcept { return primary_inputs_; }
  const std::vector<GateId>& key_inputs() const noexcept { return key_inputs_; }
  const std::vector<GateId>& primary_outputs() const noexcept { return primary_outputs_; }
  const std::vector<GateId>& flipflops() const noexcept { return flipflops_; }

  std::optional<GateId> find( std::string_view name ) const;
  std::string unique_name( std::string_view prefix );
  bool is_output( GateId id ) const { return output_refs_[id] > 0; }

  /*! \brief Distinct consumers of a gate in ascending id order. */
  std::vector<GateId> consumers( GateId id ) const;

  /*! \brief Topological order of all live gates, cutting at flip-flop inputs.
   *
   * Returns std::nullopt when the combinational part contains a cycle.
   */
  std::optional<std::vector<GateId>> try_topological_order() const;
  /*! \brief As try_topological_order(), but throws Error("cycle") on cycles. */
  std::vector<GateId> topological_order() const;

private:
  GateId push( std::string name, GateType type, std::vector<GateId> fanin );

  std::vector<Gate> gates_;
  std::vector<std::uint32_t> output_refs_;
  std::unordered_map<std::string, GateId> names_;
  std::vector<GateId> primary_inputs_;
  std::vector<GateId> key_inputs_;
  std::vector<GateId> primary_outputs_;
  std::vector<GateId> flipflops_;
  std::uint64_t name_counter_ = 0;
};

struct Violation
{
  GateId gate = no_gate;
  std::string rule;
  std::string message;
};

/*! \brief Structural checks; an empty result means every invariant holds. */
std::vector<Violation> validate( const Netlist& netlist );

/*! \brief True when every logic gate has at most two inputs (NOT/BUF/DFF exactly one). */
bool is_generic( const Netlist& netlist );

/*! \brief Gates that can reach a primary output or flip-flop input. */
std::vector<bool> observable_gates( const Netlist& netlist );

/*! \brief Gates driven only by key inputs (directly or through other such gates). */
std::vector<bool> key_only_gates( const Netlist& netlist );

} // namespace lockml
