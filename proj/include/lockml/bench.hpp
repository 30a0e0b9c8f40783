/*!
  \file bench.hpp
  \brief Reader and writer for the ISCAS bench netlist format.

  Grammar (one statement per line, `#` starts a comment, keywords are
  case-insensitive):

      INPUT(<name>)
      OUTPUT(<name>)
      <name> = <GATE>(<name>{, <name>})
      <name> = DFF(<name>)
      <name> = CONST0() | CONST1()

  GATE is one of NOT, AND, NAND, OR, XOR, NOR, XNOR, BUF/BUFF. Inputs named
  `keyinput<k>` are key inputs; their indices must be 0..K-1 without gaps.
*/

#pragma once

#include "lockml/netlist.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace lockml
{

Netlist parse_bench( std::string_view text );
std::string write_bench( const Netlist& netlist );

Netlist read_bench_file( const std::filesystem::path& path );
void write_bench_file( const Netlist& netlist, const std::filesystem::path& path );

/*! \brief Name used for key input `index`. */
std::string key_input_name( std::size_t index );

} // namespace lockml
