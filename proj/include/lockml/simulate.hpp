/*!
  \file simulate.hpp
  \brief Bit-parallel logic simulation and key application.
*/

#pragma once

#include "lockml/netlist.hpp"

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

namespace lockml
{

/*! \brief Evaluates a gate type on 64 patterns at once. */
std::uint64_t evaluate_gate( GateType type, std::span<const std::uint64_t> inputs );

/*! \brief Word-parallel simulator bound to one netlist.
 *
 * Each std::uint64_t carries 64 independent patterns. Flip-flops are D-type:
 * their output is the supplied state and their next state is their fanin.
 */
class Simulator
{
public:
  explicit Simulator( const Netlist& netlist );

  /*! \brief Values of every gate slot, given words for primary inputs, key inputs and flip-flops in list order. */
  std::vector<std::uint64_t> run( std::span<const std::uint64_t> primary_inputs, std::span<const std::uint64_t> key_inputs,
                                  std::span<const std::uint64_t> ff_state ) const;

  std::vector<std::uint64_t> outputs( const std::vector<std::uint64_t>& values ) const;
  std::vector<std::uint64_t> next_state( const std::vector<std::uint64_t>& values ) const;

  const Netlist& netlist() const noexcept { return netlist_; }

private:
  const Netlist& netlist_;
  std::vector<GateId> order_;
};

struct SimulationResult
{
  /*! Output values in primary output order. */
  std::vector<bool> outputs;
  /*! Next flip-flop state in flip-flop order. */
  std::vector<bool> next_state;
};

/*! \brief Single-pattern simulation.
 *
 * `assignment` must cover every primary and key input; flip-flops missing from
 * `ff_state` start at 0.
 */
SimulationResult simulate( const Netlist& netlist, const std::unordered_map<GateId, bool>& assignment,
                           const std::unordered_map<GateId, bool>& ff_state = {} );

/*! \brief Hard-codes the key into the netlist; the result has no key inputs.
 *
 * Key gates fed by a constant collapse locally: XOR(0,x) and XNOR(1,x) become
 * BUF(x), the other two polarities become NOT(x).
 */
Netlist apply_key( const Netlist& netlist, const Key& key );

} // namespace lockml
