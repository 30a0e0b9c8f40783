/*!
  \file extraction.hpp
  \brief Locality vector extraction around key gates.

  A locality vector is the concatenation of a backward section (fan-in cone
  of the key gate's data input, outputs of the breadth-first search prepended
  so that the section reads from inputs toward the key gate), the key gate's
  own code, and a forward section (fan-out cone, appended). Every gate has
  exactly F_in (backward) or F_out (forward) neighbour slots; missing
  neighbours and primary inputs occupy a slot with code 0. The window is
  unrolled as a tree, so a gate reached twice is emitted twice and the
  vector length depends only on the parameters.

  Gate codes: NOT 1, AND 2, NAND 3, OR 4, XOR 5, NOR 6, XNOR 7, BUF 8, FF 9.
*/

#pragma once

#include "lockml/netlist.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace lockml
{

enum class DepthMode
{
  /*! depth counts breadth-first generations; D levels of neighbours are emitted */
  levels,
  /*! depth counts dequeued gates; max(D-1, 1) gates are expanded */
  nodes
};

enum class OverflowPolicy
{
  /*! fail when non-empty entries remain beyond the target length */
  error,
  /*! drop whatever remains beyond the target length */
  truncate
};

struct ExtractionParams
{
  std::size_t backward_depth = 5;
  std::size_t forward_depth = 5;
  std::size_t fan_in = 2;
  std::size_t fan_out = 3;
  DepthMode depth_mode = DepthMode::levels;
  std::size_t vector_length = 400;
  /*! At the default geometry dense fan-out cones reach past entry 400, hence truncate. */
  OverflowPolicy overflow = OverflowPolicy::truncate;

  /*! \brief Throws Error("config-schema") when an invariant is violated. */
  void check() const;
};

enum class Direction
{
  backward,
  forward
};

/*! \brief Gate code 1..9; structural markers, constants and empty slots map to 0. */
std::uint8_t encode_gate( GateType type );

/*! \brief Number of entries a section produces under the given parameters. */
std::size_t section_length( Direction direction, const ExtractionParams& params );

/*! \brief Breadth-first extraction of one section rooted at `root` (the root itself is not emitted). */
std::vector<std::uint8_t> bfs_extract( const Netlist& netlist, Direction direction, GateId root,
                                       const ExtractionParams& params );

struct LocalityVector
{
  std::size_t key_index = 0;
  std::optional<std::uint8_t> label;
  std::vector<std::uint8_t> raw;
  std::vector<float> formatted;
  /*! Split points of `raw`: backward section is [0, center), forward section is (center, end). */
  std::size_t center = 0;
};

/*! \brief Key gate driven by key input `index` and its data-side fanin.
 *
 * Follows the key input through gates fed only by key inputs (the result of
 * run collapsing) to the first XOR/XNOR with a non-key fanin.
 */
std::pair<GateId, GateId> locate_key_gate( const Netlist& netlist, std::size_t index );

LocalityVector extract_locality( const Netlist& netlist, std::size_t key_index, const ExtractionParams& params,
                                 std::optional<bool> label = std::nullopt );

/*! \brief One locality per key input, labelled with key[i] when a key is given. */
std::vector<LocalityVector> lve( const Netlist& netlist, const ExtractionParams& params,
                                 const std::optional<Key>& key = std::nullopt );

/*! \brief Trims trailing empty entries or pads with zeros to `length` codes. */
std::vector<std::uint8_t> fit_length( std::span<const std::uint8_t> raw, std::size_t length, OverflowPolicy overflow );

/*! \brief fit_length() followed by division by 9. */
std::vector<float> format_vector( std::span<const std::uint8_t> raw, std::size_t length,
                                  OverflowPolicy overflow = OverflowPolicy::error );

/*! \brief Tree view of one section; the root is the search root and carries no code. */
struct WindowNode
{
  std::uint8_t code = 0;
  std::vector<WindowNode> children;

  bool operator==( const WindowNode& ) const = default;
};

/*! \brief Rebuilds the window tree from a section produced by bfs_extract(). */
WindowNode reconstruct_window( std::span<const std::uint8_t> section, Direction direction,
                               const ExtractionParams& params );

struct GrayImage
{
  std::size_t width = 0;
  std::size_t height = 0;
  /*! Row-major, one byte per pixel. */
  std::vector<std::uint8_t> pixels;

  std::uint8_t at( std::size_t row, std::size_t col ) const { return pixels[row * width + col]; }
};

/*! \brief Stacks vectors as image columns (width = vector count, height = vector length).
 *
 * With `group_by_label` the result holds one image per label (key 0 and 1);
 * otherwise a single image under key -1.
 */
std::map<int, GrayImage> export_image( std::span<const LocalityVector> vectors, bool group_by_label );

void write_pgm( const GrayImage& image, const std::filesystem::path& path );
GrayImage read_pgm( const std::filesystem::path& path );

} // namespace lockml
