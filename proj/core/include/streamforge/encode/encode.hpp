#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "streamforge/corpus/problem.hpp"
#include "streamforge/minicp/model.hpp"

namespace streamforge::encode {

class EncodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense C x H x W tensor with all cells in [0, 1].
struct SolutionTensor {
  corpus::ShapeKind kind = corpus::ShapeKind::Matrix;
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;  ///< row-major, channel-major: [c][h][w]

  SolutionTensor() = default;
  SolutionTensor(corpus::ShapeKind k, int c, int h, int w)
      : kind(k), channels(c), height(h), width(w),
        data(static_cast<std::size_t>(c) * static_cast<std::size_t>(h) *
                 static_cast<std::size_t>(w),
             0.0) {}

  double at(int c, int h, int w) const { return data[index(c, h, w)]; }
  double& at(int c, int h, int w) { return data[index(c, h, w)]; }

  std::size_t index(int c, int h, int w) const {
    return (static_cast<std::size_t>(c) * static_cast<std::size_t>(height) +
            static_cast<std::size_t>(h)) *
               static_cast<std::size_t>(width) +
           static_cast<std::size_t>(w);
  }

  std::size_t size() const { return data.size(); }

  bool operator==(const SolutionTensor&) const = default;
};

/// Encodes one solution of a resolved instance as a tensor:
///  - Matrix: 1 x H x W grayscale grid, cell = value / declared domain max.
///  - Permutation: 1 x n x n 0/1 grid with a one at (p, x[p]).
///  - Assignment: one 0/1 channel per domain value over the entity-by-slot
///    grid; channel (v - lo) holds a one at (i, j) when grid[i, j] = v.
///  - PackingCoords: 1 x deck_length x deck_width raster; every cell covered
///    by a container holds that container's class id divided by the largest
///    class id, empty cells hold 0.  Rotation swaps width and length before
///    rasterisation; two containers covering one cell is an error.
SolutionTensor encode(corpus::ShapeKind kind, const minicp::Instance& instance,
                      const minicp::Solution& solution);

/// Plain-text grid serialisation: a header line "kind C H W" followed by
/// C blocks of H lines each holding W space-separated cell values.
std::string to_text(const SolutionTensor& tensor);
SolutionTensor from_text(const std::string& text);

// ---- shape views -----------------------------------------------------------
// Helpers shared with the property catalogs: locate the decision variables a
// shape kind is built from.

/// The unique 2-D integer variable of a matrix- or assignment-shaped instance.
const minicp::VarInfo& grid_var(const minicp::Instance& instance);

/// The unique 1-D integer variable of a permutation-shaped instance.
const minicp::VarInfo& permutation_var(const minicp::Instance& instance);

/// Raw geometry of one packing solution, with rotation already applied.
struct PackingView {
  int n_containers = 0;
  int deck_width = 0;
  int deck_length = 0;
  long long max_class_id = 0;
  std::vector<long long> left;        ///< per container, 0-based deck column
  std::vector<long long> bottom;      ///< per container, 0-based deck row
  std::vector<long long> width;       ///< x-extent after rotation
  std::vector<long long> length;      ///< y-extent after rotation
  std::vector<long long> class_id;
  std::vector<long long> rotated;     ///< 0/1; all zero when the model has no
                                      ///< rotation variable
};

/// Reads container geometry from a packing solution.  Expects variables
/// `Left`, `Bottom` (and optionally `rotated`) plus parameters `width`,
/// `length`, `class`, `deck_width`, `deck_length`.
PackingView packing_view(const minicp::Instance& instance,
                         const minicp::Solution& solution);

}  // namespace streamforge::encode
