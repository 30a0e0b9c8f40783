/*!
  \file ann.hpp
  \brief Small feed-forward network engine: dense, 3x3 valid convolution,
         2x2/stride-1 max pooling, ReLU, softmax with sparse cross-entropy, Adam.

  Activations are row-major matrices with one sample per row; image tensors
  are flattened in height-width-channel order, so a 400-entry locality vector
  is at the same time a 20x20x1 image.
*/

#pragma once

#include "lockml/common.hpp"
#include "lockml/dataset.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace lockml
{

template<typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Shape
{
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t channels = 1;

  std::size_t size() const noexcept { return height * width * channels; }
  bool operator==( const Shape& ) const = default;
};

enum class LayerKind
{
  dense,
  conv2d,
  maxpool,
  relu,
  flatten,
  softmax
};

std::string_view to_string( LayerKind kind );

struct LayerSpec
{
  LayerKind kind = LayerKind::relu;
  /*! Units for dense, filters for conv2d, unused otherwise. */
  std::size_t size = 0;

  bool operator==( const LayerSpec& ) const = default;

  static LayerSpec dense( std::size_t units ) { return { LayerKind::dense, units }; }
  static LayerSpec conv( std::size_t filters ) { return { LayerKind::conv2d, filters }; }
  static LayerSpec pool() { return { LayerKind::maxpool, 0 }; }
  static LayerSpec relu() { return { LayerKind::relu, 0 }; }
  static LayerSpec flatten() { return { LayerKind::flatten, 0 }; }
  static LayerSpec softmax() { return { LayerKind::softmax, 0 }; }
};

struct ModelSpec
{
  Shape input;
  std::vector<LayerSpec> layers;

  /*! \brief Output shape of every layer; throws Error("spatial-underflow") when a dimension drops below 1. */
  std::vector<Shape> shapes() const;
  std::size_t parameter_count() const;
  bool operator==( const ModelSpec& ) const = default;
};

nlohmann::json to_json( const ModelSpec& spec );
ModelSpec model_spec_from_json( const nlohmann::json& j );

/*! \brief Dense stack 400-1000-256-2 (GSS) or 400-512-128-2 (SRS). */
ModelSpec build_mlp( Scenario scenario );

enum class InternalLayer
{
  conv,
  pool
};

struct CnnArchitecture
{
  std::vector<InternalLayer> internal;

  /*! e.g. "CCP", empty string for no internal layers */
  std::string key() const;
  static CnnArchitecture from_key( std::string_view key );
  bool operator==( const CnnArchitecture& ) const = default;
};

/*! \brief conv(64) -> internal layers (conv(128) or pool) -> flatten -> dense(128) -> dense(2) softmax. */
ModelSpec build_cnn( const CnnArchitecture& arch, Shape input = { 20, 20, 1 } );

template<typename T>
class Layer
{
public:
  virtual ~Layer() = default;
  virtual Matrix<T> forward( const Matrix<T>& x ) const = 0;
  /*! Forward pass that keeps what backward() needs. */
  virtual Matrix<T> forward_train( const Matrix<T>& x ) = 0;
  /*! Takes dL/d(output), accumulates parameter gradients, returns dL/d(input). */
  virtual Matrix<T> backward( const Matrix<T>& grad ) = 0;
  virtual std::vector<Matrix<T>*> parameters() { return {}; }
  virtual std::vector<Matrix<T>*> gradients() { return {}; }
};

template<typename T>
class Network
{
public:
  /*! \brief Builds and initializes (He-uniform hidden, Glorot-uniform output, zero biases). */
  Network( ModelSpec spec, std::uint64_t seed );
  Network( const Network& other );
  Network& operator=( const Network& other );
  Network( Network&& ) noexcept = default;
  Network& operator=( Network&& ) noexcept = default;
  ~Network();

  const ModelSpec& spec() const noexcept { return spec_; }

  /*! \brief Class probabilities for a batch (one sample per row). */
  Matrix<T> forward( const Matrix<T>& x ) const;

  /*! \brief Forward, mean sparse cross-entropy and backward; gradients are overwritten. Returns the loss. */
  T loss_and_gradients( const Matrix<T>& x, std::span<const std::uint8_t> labels, Matrix<T>* probabilities = nullptr );

  /*! Mean sparse cross-entropy without touching gradients. */
  T loss( const Matrix<T>& x, std::span<const std::uint8_t> labels ) const;

  std::vector<Matrix<T>*> parameters();
  std::vector<Matrix<T>*> gradients();
  std::vector<const Matrix<T>*> parameters() const;

  std::vector<Matrix<double>> weights() const;
  void set_weights( const std::vector<Matrix<double>>& w );

  template<typename U>
  Network<U> cast() const
  {
    Network<U> out( spec_, 0 );
    out.set_weights( weights() );
    return out;
  }

private:
  void build( std::uint64_t seed );
  std::size_t trunk_end() const;

  ModelSpec spec_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

extern template class Network<float>;
extern template class Network<double>;

struct AdamConfig
{
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
};

template<typename T>
class Adam
{
public:
  explicit Adam( AdamConfig config = {} ) : config_( config ) {}
  void step( Network<T>& network );
  std::size_t steps() const noexcept { return t_; }

private:
  AdamConfig config_;
  std::size_t t_ = 0;
  std::vector<Matrix<T>> m_, v_;
};

extern template class Adam<float>;
extern template class Adam<double>;

struct TrainOptions
{
  std::size_t epochs = 30;
  std::size_t batch = 128;
  std::uint64_t seed = 0;
  AdamConfig adam;
  /*! Called after every epoch with (epoch, loss, accuracy). */
  std::function<void( std::size_t, double, double )> on_epoch;
};

struct TrainingHistory
{
  std::vector<double> loss;
  std::vector<double> accuracy;
  std::size_t steps = 0;
};

/*! \brief Mini-batch Adam on sparse categorical cross-entropy, reshuffled every epoch. */
TrainingHistory train( Network<float>& network, const Matrix<float>& x, std::span<const std::uint8_t> labels,
                       const TrainOptions& options );

struct Prediction
{
  std::uint8_t bit = 0;
  std::array<double, 2> probabilities{ 0.5, 0.5 };
};

/*! \brief Argmax over two classes; an exact tie resolves to 0. */
std::vector<Prediction> predict( const Network<float>& network, const Matrix<float>& x );

/*! \brief Formatted vectors of a dataset, one per row. */
Matrix<float> to_matrix( const LabeledDataset& dataset );

/*! \brief Percentage of rows whose predicted bit equals the label. */
double accuracy( const Network<float>& network, const Matrix<float>& x, std::span<const std::uint8_t> labels );

struct TrainedModel
{
  Network<float> network;
  nlohmann::json metadata = nlohmann::json::object();
};

/*! \brief Binary container: magic, JSON header (spec, shapes, metadata), little-endian float64 weights. */
void save_model( const Network<float>& network, const nlohmann::json& metadata, const std::filesystem::path& path );
TrainedModel load_model( const std::filesystem::path& path );

struct GradCheckReport
{
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::string worst;
};

/*! \brief Central finite differences against backpropagation for every parameter.
 *
 * Relative error is |a - n| / max(|a|, |n|, 1e-6).
 */
GradCheckReport grad_check( Network<double>& network, const Matrix<double>& x, std::span<const std::uint8_t> labels,
                            double h = 1e-3 );

} // namespace lockml
