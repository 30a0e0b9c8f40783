/*!
  \file transform.hpp
  \brief Generic two-input decomposition and a peephole re-optimisation pass set.

  The optimiser stands in for a resynthesis step after locking: it applies a
  small set of local, equivalence-preserving rewrites until none fires.
*/

#pragma once

#include "lockml/netlist.hpp"

#include <cstdint>
#include <string_view>
#include <vector>

namespace lockml
{

/*! \brief Decomposes every gate into gates with at most two inputs.
 *
 * n-ary AND/OR/XOR families become left-leaning binary trees whose root keeps
 * the original name and type; one-input AND/OR/XOR become BUF and one-input
 * NAND/NOR/XNOR become NOT.
 */
Netlist to_generic( const Netlist& netlist );

enum class Pass
{
  constant_propagation,
  double_inverter,
  buffer_elision,
  run_collapse,
  dead_gate,
  not_absorption
};

std::string_view to_string( Pass pass );
Pass pass_from_string( std::string_view name );

/*! \brief All six passes in their default order. */
std::vector<Pass> default_passes();

/*! \brief Applies the passes in order, repeatedly, until a full sweep changes nothing.
 *
 * The gate count never increases. `seed` is accepted for interface stability;
 * every pass is deterministic.
 */
Netlist optimize( const Netlist& netlist, const std::vector<Pass>& passes, std::uint64_t seed = 0 );

/*! \name In-place passes
 *  Each returns true when it changed the netlist. Removed gates keep their
 *  slots; callers compact afterwards.
 */
///@{
bool fold_constants( Netlist& netlist );
bool remove_double_inverters( Netlist& netlist );
bool elide_buffers( Netlist& netlist );
bool collapse_runs( Netlist& netlist );
bool remove_dead_gates( Netlist& netlist );
bool absorb_inverters( Netlist& netlist );
///@}

} // namespace lockml
