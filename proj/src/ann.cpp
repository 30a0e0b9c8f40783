#include "lockml/ann.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

namespace lockml
{

namespace
{

constexpr std::uint64_t init_stream = 0x696e6974;
constexpr std::uint64_t epoch_stream = 0x65706f6368;
constexpr char model_magic[8] = { 'L', 'O', 'C', 'K', 'M', 'L', 'M', '1' };

template<typename T>
void fill_uniform( Matrix<T>& m, double limit, Rng& rng )
{
  for ( Eigen::Index i = 0; i < m.size(); ++i )
  {
    m.data()[i] = static_cast<T>( rng.uniform( -limit, limit ) );
  }
}

template<typename T>
class Dense final : public Layer<T>
{
public:
  Dense( std::size_t in, std::size_t out ) : w_( in, out ), b_( Matrix<T>::Zero( 1, out ) ), gw_( in, out ), gb_( 1, out )
  {
  }

  void init( double limit, Rng& rng ) { fill_uniform( w_, limit, rng ); }

  Matrix<T> forward( const Matrix<T>& x ) const override
  {
    Matrix<T> y = x * w_;
    y.rowwise() += b_.row( 0 );
    return y;
  }

  Matrix<T> forward_train( const Matrix<T>& x ) override
  {
    x_ = x;
    return forward( x );
  }

  Matrix<T> backward( const Matrix<T>& g ) override
  {
    gw_.noalias() = x_.transpose() * g;
    gb_ = g.colwise().sum();
    return g * w_.transpose();
  }

  std::vector<Matrix<T>*> parameters() override { return { &w_, &b_ }; }
  std::vector<Matrix<T>*> gradients() override { return { &gw_, &gb_ }; }

private:
  Matrix<T> w_, b_, gw_, gb_, x_;
};

template<typename T>
class Relu final : public Layer<T>
{
public:
  Matrix<T> forward( const Matrix<T>& x ) const override { return x.cwiseMax( T( 0 ) ); }

  Matrix<T> forward_train( const Matrix<T>& x ) override
  {
    x_ = x;
    return forward( x );
  }

  Matrix<T> backward( const Matrix<T>& g ) override
  {
    return ( x_.array() > T( 0 ) ).select( g, T( 0 ) );
  }

private:
  Matrix<T> x_;
};

template<typename T>
class Identity final : public Layer<T>
{
public:
  Matrix<T> forward( const Matrix<T>& x ) const override { return x; }
  Matrix<T> forward_train( const Matrix<T>& x ) override { return x; }
  Matrix<T> backward( const Matrix<T>& g ) override { return g; }
};

template<typename T>
Matrix<T> softmax_rows( const Matrix<T>& z )
{
  Matrix<T> p( z.rows(), z.cols() );
  for ( Eigen::Index r = 0; r < z.rows(); ++r )
  {
    const T m = z.row( r ).maxCoeff();
    p.row( r ) = ( z.row( r ).array() - m ).exp();
    p.row( r ) /= p.row( r ).sum();
  }
  return p;
}

template<typename T>
class Softmax final : public Layer<T>
{
public:
  Matrix<T> forward( const Matrix<T>& x ) const override { return softmax_rows( x ); }

  Matrix<T> forward_train( const Matrix<T>& x ) override
  {
    p_ = forward( x );
    return p_;
  }

  Matrix<T> backward( const Matrix<T>& g ) override
  {
    Matrix<T> out = p_.cwiseProduct( g );
    const auto dot = out.rowwise().sum();
    out -= p_.cwiseProduct( dot.replicate( 1, g.cols() ) );
    return out;
  }

private:
  Matrix<T> p_;
};

/* 3x3 valid convolution via im2col. */
template<typename T>
class Conv final : public Layer<T>
{
public:
  Conv( Shape in, std::size_t filters )
      : in_( in ), out_{ in.height - 2, in.width - 2, filters }, w_( 9 * in.channels, filters ),
        b_( Matrix<T>::Zero( 1, filters ) ), gw_( 9 * in.channels, filters ), gb_( 1, filters )
  {
  }

  void init( double limit, Rng& rng ) { fill_uniform( w_, limit, rng ); }

  Matrix<T> forward( const Matrix<T>& x ) const override { return apply( im2col( x ) ); }

  Matrix<T> forward_train( const Matrix<T>& x ) override
  {
    cols_ = im2col( x );
    return apply( cols_ );
  }

  Matrix<T> backward( const Matrix<T>& g ) override
  {
    const auto batch = g.rows();
    const Eigen::Map<const Matrix<T>> gm( g.data(), batch * out_.height * out_.width, out_.channels );
    gw_.noalias() = cols_.transpose() * gm;
    gb_ = gm.colwise().sum();
    const Matrix<T> dcols = gm * w_.transpose();
    Matrix<T> dx = Matrix<T>::Zero( batch, in_.size() );
    const auto c = in_.channels;
    for ( Eigen::Index n = 0; n < batch; ++n )
    {
      T* dst = dx.row( n ).data();
      for ( std::size_t i = 0; i < out_.height; ++i )
      {
        for ( std::size_t j = 0; j < out_.width; ++j )
        {
          const T* src = dcols.row( ( n * out_.height + i ) * out_.width + j ).data();
          for ( std::size_t di = 0; di < 3; ++di )
          {
            for ( std::size_t dj = 0; dj < 3; ++dj )
            {
              T* d = dst + ( ( i + di ) * in_.width + ( j + dj ) ) * c;
              const T* s = src + ( di * 3 + dj ) * c;
              for ( std::size_t k = 0; k < c; ++k )
              {
                d[k] += s[k];
              }
            }
          }
        }
      }
    }
    return dx;
  }

  std::vector<Matrix<T>*> parameters() override { return { &w_, &b_ }; }
  std::vector<Matrix<T>*> gradients() override { return { &gw_, &gb_ }; }

private:
  Matrix<T> im2col( const Matrix<T>& x ) const
  {
    const auto batch = x.rows();
    const auto c = in_.channels;
    Matrix<T> cols( batch * out_.height * out_.width, 9 * c );
    for ( Eigen::Index n = 0; n < batch; ++n )
    {
      const T* src = x.row( n ).data();
      for ( std::size_t i = 0; i < out_.height; ++i )
      {
        for ( std::size_t j = 0; j < out_.width; ++j )
        {
          T* dst = cols.row( ( n * out_.height + i ) * out_.width + j ).data();
          for ( std::size_t di = 0; di < 3; ++di )
          {
            // the three horizontally adjacent pixels are contiguous in memory
            std::memcpy( dst + di * 3 * c, src + ( ( i + di ) * in_.width + j ) * c, 3 * c * sizeof( T ) );
          }
        }
      }
    }
    return cols;
  }

  Matrix<T> apply( const Matrix<T>& cols ) const
  {
    Matrix<T> y = cols * w_;
    y.rowwise() += b_.row( 0 );
    const auto batch = cols.rows() / static_cast<Eigen::Index>( out_.height * out_.width );
    return Eigen::Map<Matrix<T>>( y.data(), batch, out_.size() );
  }

  Shape in_, out_;
  Matrix<T> w_, b_, gw_, gb_, cols_;
};

/* 2x2 max pooling with stride 1. */
template<typename T>
class MaxPool final : public Layer<T>
{
public:
  explicit MaxPool( Shape in ) : in_( in ), out_{ in.height - 1, in.width - 1, in.channels } {}

  Matrix<T> forward( const Matrix<T>& x ) const override { return run( x, nullptr ); }

  Matrix<T> forward_train( const Matrix<T>& x ) override
  {
    arg_.resize( static_cast<std::size_t>( x.rows() ) * out_.size() );
    return run( x, arg_.data() );
  }

  Matrix<T> backward( const Matrix<T>& g ) override
  {
    Matrix<T> dx = Matrix<T>::Zero( g.rows(), in_.size() );
    for ( Eigen::Index n = 0; n < g.rows(); ++n )
    {
      for ( std::size_t o = 0; o < out_.size(); ++o )
      {
        dx( n, arg_[n * out_.size() + o] ) += g( n, o );
      }
    }
    return dx;
  }

private:
  Matrix<T> run( const Matrix<T>& x, std::uint32_t* arg ) const
  {
    Matrix<T> y( x.rows(), out_.size() );
    const auto c = in_.channels;
    for ( Eigen::Index n = 0; n < x.rows(); ++n )
    {
      const T* src = x.row( n ).data();
      T* dst = y.row( n ).data();
      for ( std::size_t i = 0; i < out_.height; ++i )
      {
        for ( std::size_t j = 0; j < out_.width; ++j )
        {
          const std::size_t cand[4] = { ( i * in_.width + j ) * c, ( i * in_.width + j + 1 ) * c,
                                        ( ( i + 1 ) * in_.width + j ) * c, ( ( i + 1 ) * in_.width + j + 1 ) * c };
          for ( std::size_t k = 0; k < c; ++k )
          {
            auto best = cand[0] + k;
            for ( int q = 1; q < 4; ++q )
            {
              if ( src[cand[q] + k] > src[best] )
              {
                best = cand[q] + k;
              }
            }
            const auto o = ( i * out_.width + j ) * c + k;
            dst[o] = src[best];
            if ( arg )
            {
              arg[n * out_.size() + o] = static_cast<std::uint32_t>( best );
            }
          }
        }
      }
    }
    return y;
  }

  Shape in_, out_;
  std::vector<std::uint32_t> arg_;
};

template<typename T>
bool all_finite( const Matrix<T>& m )
{
  return m.allFinite();
}

} // namespace

std::string_view to_string( LayerKind kind )
{
  switch ( kind )
  {
  case LayerKind::dense:
    return "dense";
  case LayerKind::conv2d:
    return "conv2d";
  case LayerKind::maxpool:
    return "maxpool";
  case LayerKind::relu:
    return "relu";
  case LayerKind::flatten:
    return "flatten";
  case LayerKind::softmax:
    return "softmax";
  }
  return "?";
}

std::vector<Shape> ModelSpec::shapes() const
{
  std::vector<Shape> out;
  auto s = input;
  for ( std::size_t i = 0; i < layers.size(); ++i )
  {
    const auto& l = layers[i];
    switch ( l.kind )
    {
    case LayerKind::dense:
      s = { 1, 1, l.size };
      break;
    case LayerKind::conv2d:
      if ( s.height < 3 || s.width < 3 )
      {
        throw Error( "spatial-underflow", "layer " + std::to_string( i ) + " (conv2d) would produce a " +
                                              std::to_string( s.height ) + "x" + std::to_string( s.width ) +
                                              " input an empty output" );
      }
      s = { s.height - 2, s.width - 2, l.size };
      break;
    case LayerKind::maxpool:
      if ( s.height < 2 || s.width < 2 )
      {
        throw Error( "spatial-underflow", "layer " + std::to_string( i ) + " (maxpool) on a " +
                                              std::to_string( s.height ) + "x" + std::to_string( s.width ) + " input" );
      }
      s = { s.height - 1, s.width - 1, s.channels };
      break;
    case LayerKind::flatten:
      s = { 1, 1, s.size() };
      break;
    case LayerKind::relu:
    case LayerKind::softmax:
      break;
    }
    out.push_back( s );
  }
  return out;
}

std::size_t ModelSpec::parameter_count() const
{
  const auto sh = shapes();
  std::size_t total = 0;
  auto prev = input;
  for ( std::size_t i = 0; i < layers.size(); ++i )
  {
    if ( layers[i].kind == LayerKind::dense )
    {
      total += prev.size() * layers[i].size + layers[i].size;
    }
    else if ( layers[i].kind == LayerKind::conv2d )
    {
      total += 9 * prev.channels * layers[i].size + layers[i].size;
    }
    prev = sh[i];
  }
  return total;
}

nlohmann::json to_json( const ModelSpec& spec )
{
  nlohmann::json layers = nlohmann::json::array();
  for ( const auto& l : spec.layers )
  {
    nlohmann::json j{ { "kind", to_string( l.kind ) } };
    if ( l.kind == LayerKind::dense || l.kind == LayerKind::conv2d )
    {
      j["size"] = l.size;
    }
    layers.push_back( j );
  }
  return { { "input", { spec.input.height, spec.input.width, spec.input.channels } }, { "layers", layers } };
}

ModelSpec model_spec_from_json( const nlohmann::json& j )
{
  try
  {
    ModelSpec s;
    const auto in = j.at( "input" ).get<std::vector<std::size_t>>();
    if ( in.size() != 3 )
    {
      throw Error( "format", "model input shape must have three dimensions" );
    }
    s.input = { in[0], in[1], in[2] };
    for ( const auto& l : j.at( "layers" ) )
    {
      const auto kind = l.at( "kind" ).get<std::string>();
      LayerSpec ls;
      if ( kind == "dense" )
        ls = LayerSpec::dense( l.at( "size" ).get<std::size_t>() );
      else if ( kind == "conv2d" )
        ls = LayerSpec::conv( l.at( "size" ).get<std::size_t>() );
      else if ( kind == "maxpool" )
        ls = LayerSpec::pool();
      else if ( kind == "relu" )
        ls = LayerSpec::relu();
      else if ( kind == "flatten" )
        ls = LayerSpec::flatten();
      else if ( kind == "softmax" )
        ls = LayerSpec::softmax();
      else
        throw Error( "format", "unknown layer kind '" + kind + "'" );
      s.layers.push_back( ls );
    }
    s.shapes();
    return s;
  }
  catch ( const nlohmann::json::exception& e )
  {
    throw Error( "format", std::string( "malformed model spec: " ) + e.what() );
  }
}

ModelSpec build_mlp( Scenario scenario )
{
  const std::size_t h1 = scenario == Scenario::gss ? 1000 : 512;
  const std::size_t h2 = scenario == Scenario::gss ? 256 : 128;
  return { { 1, 1, 400 },
           { LayerSpec::dense( h1 ), LayerSpec::relu(), LayerSpec::dense( h2 ), LayerSpec::relu(), LayerSpec::dense( 2 ),
             LayerSpec::softmax() } };
}

std::string CnnArchitecture::key() const
{
  std::string k;
  for ( auto l : internal )
  {
    k.push_back( l == InternalLayer::conv ? 'C' : 'P' );
  }
  return k;
}

CnnArchitecture CnnArchitecture::from_key( std::string_view key )
{
  CnnArchitecture a;
  for ( char c : key )
  {
    if ( c != 'C' && c != 'P' )
    {
      throw Error( "format", "architecture keys use only 'C' and 'P'" );
    }
    a.internal.push_back( c == 'C' ? InternalLayer::conv : InternalLayer::pool );
  }
  return a;
}

ModelSpec build_cnn( const CnnArchitecture& arch, Shape input )
{
  ModelSpec s;
  s.input = input;
  s.layers = { LayerSpec::conv( 64 ), LayerSpec::relu() };
  for ( auto l : arch.internal )
  {
    if ( l == InternalLayer::conv )
    {
      s.layers.push_back( LayerSpec::conv( 128 ) );
      s.layers.push_back( LayerSpec::relu() );
    }
    else
    {
      s.layers.push_back( LayerSpec::pool() );
    }
  }
  s.layers.insert( s.layers.end(), { LayerSpec::flatten(), LayerSpec::dense( 128 ), LayerSpec::relu(),
                                     LayerSpec::dense( 2 ), LayerSpec::softmax() } );
  s.shapes();
  return s;
}

template<typename T>
Network<T>::Network( ModelSpec spec, std::uint64_t seed ) : spec_( std::move( spec ) )
{
  build( seed );
}

template<typename T>
Network<T>::Network( const Network& other ) : spec_( other.spec_ )
{
  build( 0 );
  set_weights( other.weights() );
}

template<typename T>
Network<T>& Network<T>::operator=( const Network& other )
{
  if ( this != &other )
  {
    Network copy( other );
    *this = std::move( copy );
  }
  return *this;
}

template<typename T>
Network<T>::~Network() = default;

template<typename T>
void Network<T>::build( std::uint64_t seed )
{
  const auto shapes = spec_.shapes();
  if ( spec_.layers.empty() || spec_.layers.back().kind != LayerKind::softmax )
  {
    throw Error( "config-schema", "a model must end in a softmax layer" );
  }
  if ( shapes.back().size() != 2 )
  {
    throw Error( "config-schema", "the output layer must have two classes" );
  }
  std::size_t last_param = 0;
  for ( std::size_t i = 0; i < spec_.layers.size(); ++i )
  {
    if ( spec_.layers[i].kind == LayerKind::dense || spec_.layers[i].kind == LayerKind::conv2d )
    {
      last_param = i;
    }
  }
  layers_.clear();
  auto prev = spec_.input;
  for ( std::size_t i = 0; i < spec_.layers.size(); ++i )
  {
    const auto& l = spec_.layers[i];
    Rng rng( derive_seed( seed, { init_stream, i } ) );
    switch ( l.kind )
    {
    case LayerKind::dense:
    {
      auto d = std::make_unique<Dense<T>>( prev.size(), l.size );
      const double fan_in = static_cast<double>( prev.size() );
      const double limit = i == last_param ? std::sqrt( 6.0 / ( fan_in + static_cast<double>( l.size ) ) )
                                           : std::sqrt( 6.0 / fan_in );
      d->init( limit, rng );
      layers_.push_back( std::move( d ) );
      break;
    }
    case LayerKind::conv2d:
    {
      auto c = std::make_unique<Conv<T>>( prev, l.size );
      const double fan_in = 9.0 * static_cast<double>( prev.channels );
      const double limit = i == last_param ? std::sqrt( 6.0 / ( fan_in + 9.0 * static_cast<double>( l.size ) ) )
                                           : std::sqrt( 6.0 / fan_in );
      c->init( limit, rng );
      layers_.push_back( std::move( c ) );
      break;
    }
    case LayerKind::maxpool:
      layers_.push_back( std::make_unique<MaxPool<T>>( prev ) );
      break;
    case LayerKind::relu:
      layers_.push_back( std::make_unique<Relu<T>>() );
      break;
    case LayerKind::flatten:
      layers_.push_back( std::make_unique<Identity<T>>() );
      break;
    case LayerKind::softmax:
      layers_.push_back( std::make_unique<Softmax<T>>() );
      break;
    }
    prev = shapes[i];
  }
}

template<typename T>
std::size_t Network<T>::trunk_end() const
{
  return layers_.size() - 1;
}

template<typename T>
Matrix<T> Network<T>::forward( const Matrix<T>& x ) const
{
  if ( static_cast<std::size_t>( x.cols() ) != spec_.input.size() )
  {
    throw Error( "shape-mismatch", "model expects " + std::to_string( spec_.input.size() ) + " inputs, got " +
                                       std::to_string( x.cols() ) );
  }
  Matrix<T> a = x;
  for ( const auto& l : layers_ )
  {
    a = l->forward( a );
  }
  return a;
}

template<typename T>
T Network<T>::loss_and_gradients( const Matrix<T>& x, std::span<const std::uint8_t> labels, Matrix<T>* probabilities )
{
  if ( static_cast<std::size_t>( x.cols() ) != spec_.input.size() || labels.size() != static_cast<std::size_t>( x.rows() ) )
  {
    throw Error( "shape-mismatch", "batch does not match the model input or the label count" );
  }
  Matrix<T> a = x;
  for ( std::size_t i = 0; i < trunk_end(); ++i )
  {
    a = layers_[i]->forward_train( a );
  }
  // fused softmax + cross-entropy: dL/dz = (p - onehot) / batch
  const auto batch = static_cast<T>( x.rows() );
  Matrix<T> p = softmax_rows( a );
  T loss = 0;
  for ( Eigen::Index r = 0; r < a.rows(); ++r )
  {
    const T m = a.row( r ).maxCoeff();
    const T lse = m + std::log( ( a.row( r ).array() - m ).exp().sum() );
    loss += lse - a( r, labels[r] );
  }
  Matrix<T> g = p;
  for ( Eigen::Index r = 0; r < g.rows(); ++r )
  {
    g( r, labels[r] ) -= T( 1 );
  }
  g /= batch;
  for ( std::size_t i = trunk_end(); i-- > 0; )
  {
    g = layers_[i]->backward( g );
  }
  if ( probabilities )
  {
    *probabilities = std::move( p );
  }
  return loss / batch;
}

template<typename T>
T Network<T>::loss( const Matrix<T>& x, std::span<const std::uint8_t> labels ) const
{
  Matrix<T> a = x;
  for ( std::size_t i = 0; i < trunk_end(); ++i )
  {
    a = layers_[i]->forward( a );
  }
  T loss = 0;
  for ( Eigen::Index r = 0; r < a.rows(); ++r )
  {
    const T m = a.row( r ).maxCoeff();
    loss += m + std::log( ( a.row( r ).array() - m ).exp().sum() ) - a( r, labels[r] );
  }
  return loss / static_cast<T>( x.rows() );
}

template<typename T>
std::vector<Matrix<T>*> Network<T>::parameters()
{
  std::vector<Matrix<T>*> out;
  for ( auto& l : layers_ )
  {
    for ( auto* p : l->parameters() )
    {
      out.push_back( p );
    }
  }
  return out;
}

template<typename T>
std::vector<const Matrix<T>*> Network<T>::parameters() const
{
  std::vector<const Matrix<T>*> out;
  for ( auto& l : layers_ )
  {
    for ( auto* p : l->parameters() )
    {
      out.push_back( p );
    }
  }
  return out;
}

template<typename T>
std::vector<Matrix<T>*> Network<T>::gradients()
{
  std::vector<Matrix<T>*> out;
  for ( auto& l : layers_ )
  {
    for ( auto* g : l->gradients() )
    {
      out.push_back( g );
    }
  }
  return out;
}

template<typename T>
std::vector<Matrix<double>> Network<T>::weights() const
{
  std::vector<Matrix<double>> out;
  for ( const auto* p : parameters() )
  {
    out.push_back( p->template cast<double>() );
  }
  return out;
}

template<typename T>
void Network<T>::set_weights( const std::vector<Matrix<double>>& w )
{
  auto params = parameters();
  if ( params.size() != w.size() )
  {
    throw Error( "shape-mismatch", "weight list does not match the model" );
  }
  for ( std::size_t i = 0; i < w.size(); ++i )
  {
    if ( params[i]->rows() != w[i].rows() || params[i]->cols() != w[i].cols() )
    {
      throw Error( "shape-mismatch", "weight tensor " + std::to_string( i ) + " has the wrong shape" );
    }
    *params[i] = w[i].template cast<T>();
  }
}

template class Network<float>;
template class Network<double>;

template<typename T>
void Adam<T>::step( Network<T>& network )
{
  auto params = network.parameters();
  auto grads = network.gradients();
  if ( m_.empty() )
  {
    for ( auto* p : params )
    {
      m_.push_back( Matrix<T>::Zero( p->rows(), p->cols() ) );
      v_.push_back( Matrix<T>::Zero( p->rows(), p->cols() ) );
    }
  }
  ++t_;
  const auto b1 = static_cast<T>( config_.beta1 );
  const auto b2 = static_cast<T>( config_.beta2 );
  const auto eps = static_cast<T>( config_.epsilon );
  const auto lr_t = static_cast<T>( config_.learning_rate * std::sqrt( 1.0 - std::pow( config_.beta2, t_ ) ) /
                                    ( 1.0 - std::pow( config_.beta1, t_ ) ) );
  for ( std::size_t i = 0; i < params.size(); ++i )
  {
    m_[i] = b1 * m_[i] + ( T( 1 ) - b1 ) * *grads[i];
    v_[i] = b2 * v_[i] + ( T( 1 ) - b2 ) * grads[i]->cwiseAbs2();
    params[i]->array() -= lr_t * m_[i].array() / ( v_[i].array().sqrt() + eps );
  }
}

template class Adam<float>;
template class Adam<double>;

TrainingHistory train( Network<float>& network, const Matrix<float>& x, std::span<const std::uint8_t> labels,
                       const TrainOptions& options )
{
  const auto n = static_cast<std::size_t>( x.rows() );
  if ( static_cast<std::size_t>( x.cols() ) != network.spec().input.size() )
  {
    throw Error( "shape-mismatch", "dataset vectors have " + std::to_string( x.cols() ) + " entries, model expects " +
                                       std::to_string( network.spec().input.size() ) );
  }
  if ( labels.size() != n || n == 0 )
  {
    throw Error( "shape-mismatch", "training needs one label per vector and at least one vector" );
  }
  if ( options.batch == 0 )
  {
    throw Error( "config-schema", "batch size must be positive" );
  }
  Adam<float> adam( options.adam );
  TrainingHistory history;
  std::vector<std::size_t> order( n );
  for ( std::size_t epoch = 0; epoch < options.epochs; ++epoch )
  {
    std::iota( order.begin(), order.end(), 0 );
    Rng rng( derive_seed( options.seed, { epoch_stream, epoch } ) );
    rng.shuffle( order );
    double total_loss = 0;
    std::size_t correct = 0;
    for ( std::size_t start = 0; start < n; start += options.batch )
    {
      const auto count = std::min( options.batch, n - start );
      Matrix<float> xb( count, x.cols() );
      std::vector<std::uint8_t> yb( count );
      for ( std::size_t r = 0; r < count; ++r )
      {
        xb.row( r ) = x.row( order[start + r] );
        yb[r] = labels[order[start + r]];
      }
      Matrix<float> probs;
      const float loss = network.loss_and_gradients( xb, yb, &probs );
      if ( !std::isfinite( loss ) )
      {
        throw Error( "nan-loss", "loss became non-finite at epoch " + std::to_string( epoch + 1 ) + ", batch " +
                                     std::to_string( start / options.batch + 1 ) +
                                     "; try a smaller learning rate or check the input range" );
      }
      adam.step( network );
      total_loss += static_cast<double>( loss ) * count;
      for ( std::size_t r = 0; r < count; ++r )
      {
        correct += ( probs( r, 1 ) > probs( r, 0 ) ? 1 : 0 ) == yb[r];
      }
    }
    history.loss.push_back( total_loss / n );
    history.accuracy.push_back( 100.0 * correct / n );
    if ( options.on_epoch )
    {
      options.on_epoch( epoch + 1, history.loss.back(), history.accuracy.back() );
    }
  }
  history.steps = adam.steps();
  for ( const auto* p : network.parameters() )
  {
    if ( !all_finite( *p ) )
    {
      throw Error( "nan-loss", "a weight became non-finite during training" );
    }
  }
  return history;
}

std::vector<Prediction> predict( const Network<float>& network, const Matrix<float>& x )
{
  constexpr Eigen::Index chunk = 256;
  std::vector<Prediction> out;
  out.reserve( x.rows() );
  for ( Eigen::Index start = 0; start < x.rows(); start += chunk )
  {
    const auto count = std::min( chunk, x.rows() - start );
    const Matrix<float> p = network.forward( x.middleRows( start, count ) );
    for ( Eigen::Index r = 0; r < count; ++r )
    {
      Prediction pr;
      pr.probabilities = { p( r, 0 ), p( r, 1 ) };
      pr.bit = p( r, 1 ) > p( r, 0 ) ? 1 : 0;
      out.push_back( pr );
    }
  }
  return out;
}

Matrix<float> to_matrix( const LabeledDataset& dataset )
{
  Matrix<float> x( dataset.size(), dataset.vector_length );
  for ( std::size_t i = 0; i < dataset.size(); ++i )
  {
    for ( std::size_t j = 0; j < dataset.vector_length; ++j )
    {
      x( i, j ) = static_cast<float>( dataset.codes[i][j] ) / 9.0f;
    }
  }
  return x;
}

double accuracy( const Network<float>& network, const Matrix<float>& x, std::span<const std::uint8_t> labels )
{
  const auto preds = predict( network, x );
  std::size_t correct = 0;
  for ( std::size_t i = 0; i < preds.size(); ++i )
  {
    correct += preds[i].bit == labels[i];
  }
  return preds.empty() ? 0.0 : 100.0 * correct / preds.size();
}

void save_model( const Network<float>& network, const nlohmann::json& metadata, const std::filesystem::path& path )
{
  static_assert( std::endian::native == std::endian::little, "model files are little-endian" );
  const auto weights = network.weights();
  nlohmann::json tensors = nlohmann::json::array();
  for ( const auto& w : weights )
  {
    tensors.push_back( { w.rows(), w.cols() } );
  }
  const nlohmann::json header = { { "format", "lockml-model" },
                                  { "version", 1 },
                                  { "spec", to_json( network.spec() ) },
                                  { "tensors", tensors },
                                  { "metadata", metadata } };
  const auto text = header.dump();
  std::ofstream out( path, std::ios::binary );
  if ( !out )
  {
    throw Error( "io", "cannot write '" + path.string() + "'" );
  }
  out.write( model_magic, sizeof( model_magic ) );
  const std::uint64_t length = text.size();
  out.write( reinterpret_cast<const char*>( &length ), sizeof( length ) );
  out.write( text.data(), static_cast<std::streamsize>( text.size() ) );
  for ( const auto& w : weights )
  {
    out.write( reinterpret_cast<const char*>( w.data() ), static_cast<std::streamsize>( w.size() * sizeof( double ) ) );
  }
  if ( !out )
  {
    throw Error( "io", "failed writing '" + path.string() + "'" );
  }
}

TrainedModel load_model( const std::filesystem::path& path )
{
  std::ifstream in( path, std::ios::binary );
  if ( !in )
  {
    throw Error( "missing-input", "cannot open '" + path.string() + "'" );
  }
  char magic[8];
  std::uint64_t length = 0;
  in.read( magic, sizeof( magic ) );
  in.read( reinterpret_cast<char*>( &length ), sizeof( length ) );
  if ( !in || std::memcmp( magic, model_magic, sizeof( magic ) ) != 0 || length > ( 1u << 30 ) )
  {
    throw Error( "format", "'" + path.string() + "' is not a model file" );
  }
  std::string text( length, '\0' );
  in.read( text.data(), static_cast<std::streamsize>( length ) );
  nlohmann::json header;
  try
  {
    header = nlohmann::json::parse( text );
  }
  catch ( const nlohmann::json::exception& e )
  {
    throw Error( "format", std::string( "corrupt model header: " ) + e.what() );
  }
  const auto spec = model_spec_from_json( header.at( "spec" ) );
  std::vector<Matrix<double>> weights;
  for ( const auto& t : header.at( "tensors" ) )
  {
    Matrix<double> w( t.at( 0 ).get<Eigen::Index>(), t.at( 1 ).get<Eigen::Index>() );
    in.read( reinterpret_cast<char*>( w.data() ), static_cast<std::streamsize>( w.size() * sizeof( double ) ) );
    weights.push_back( std::move( w ) );
  }
  if ( !in )
  {
    throw Error( "format", "truncated model file '" + path.string() + "'" );
  }
  TrainedModel m{ Network<float>( spec, 0 ), header.value( "metadata", nlohmann::json::object() ) };
  m.network.set_weights( weights );
  return m;
}

GradCheckReport grad_check( Network<double>& network, const Matrix<double>& x, std::span<const std::uint8_t> labels,
                            double h )
{
  network.loss_and_gradients( x, labels );
  std::vector<Matrix<double>> analytic;
  for ( const auto* g : network.gradients() )
  {
    analytic.push_back( *g );
  }
  GradCheckReport report;
  auto params = network.parameters();
  for ( std::size_t t = 0; t < params.size(); ++t )
  {
    auto& p = *params[t];
    for ( Eigen::Index k = 0; k < p.size(); ++k )
    {
      const double saved = p.data()[k];
      p.data()[k] = saved + h;
      const double up = network.loss( x, labels );
      p.data()[k] = saved - h;
      const double down = network.loss( x, labels );
      p.data()[k] = saved;
      const double numeric = ( up - down ) / ( 2.0 * h );
      const double a = analytic[t].data()[k];
      const double rel = std::abs( a - numeric ) / std::max( { std::abs( a ), std::abs( numeric ), 1e-6 } );
      ++report.checked;
      if ( rel > report.max_relative_error )
      {
        report.max_relative_error = rel;
        report.worst = "tensor " + std::to_string( t ) + " element " + std::to_string( k ) + " (analytic " +
                       std::to_string( a ) + ", numeric " + std::to_string( numeric ) + ")";
      }
    }
  }
  return report;
}

} // namespace lockml
