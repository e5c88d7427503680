#include "evr/service.hpp"

#include "evr/checkpoint.hpp"
#include "evr/errors.hpp"
#include "evr/image_io.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <Eigen/Dense>

#include <condition_variable>
#include <cstdio>
#include <deque>
#include <optional>
#include <thread>

namespace evr {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace {

int size_field(const nlohmann::json& body, const char* name, int fallback, int upsample) {
  if (!body.contains(name)) return fallback;
  const auto& v = body[name];
  if (!v.is_number_integer()) throw ArgumentError(std::string(name) + ": must be an integer");
  const int n = v.get<int>();
  if (n < upsample || n > 4096) throw ArgumentError(std::string(name) + ": out of range");
  if (n % upsample != 0) throw ArgumentError(std::string(name) + ": must be a multiple of " + std::to_string(upsample));
  return n;
}

}  // namespace

RenderRequest parse_render_request(const nlohmann::json& body, int upsample) {
  if (!body.is_object()) throw ArgumentError("body: must be a JSON object");
  if (!body.contains("camera")) throw ArgumentError("camera: missing");
  RenderRequest req;
  if (body.contains("id")) req.id = body["id"];
  // camera_from_json messages already name the field ("camera.rotation: ...")
  const Camera cam = camera_from_json(body["camera"]);
  const int w = size_field(body, "width", cam.width(), upsample);
  const int h = size_field(body, "height", cam.height(), upsample);
  if (w % upsample != 0 || h % upsample != 0) {
    throw ArgumentError("camera: image size must be a multiple of " + std::to_string(upsample));
  }
  req.camera = cam.resized(w, h);
  if (body.contains("quality")) {
    const auto& q = body["quality"];
    if (!q.is_number() || q.get<double>() < 1 || q.get<double>() > 100) {
      throw ArgumentError("quality: must be a number in [1, 100]");
    }
    req.quality = static_cast<int>(q.get<double>());
  }
  return req;
}

ServiceSession::ServiceSession(MultiViewDataset data, ModelConfig model, ModelParams params, RenderConfig config,
                               std::vector<int> pool)
    : data_(std::make_unique<MultiViewDataset>(std::move(data))),
      params_(std::move(params)),
      config_(config),
      pool_(std::move(pool)) {
  config_.validate();
  renderer_ = std::make_unique<Renderer>(*data_, std::move(model));
}

std::shared_ptr<ServiceSession> ServiceSession::from_checkpoint(const std::filesystem::path& dir) {
  Checkpoint ck = load_checkpoint(dir);
  MultiViewDataset data = load_dataset(checkpoint_dataset_path(dir, ck));
  return std::make_shared<ServiceSession>(std::move(data), ck.model, std::move(ck.params), ck.render,
                                          std::move(ck.train_views));
}

nlohmann::json ServiceSession::scene_json() const {
  nlohmann::json cams = nlohmann::json::array();
  // point closest to every optical axis in the least-squares sense
  Mat3 a = Mat3::Zero();
  Vec3 b = Vec3::Zero();
  for (const Camera& c : data_->cameras) {
    cams.push_back(camera_to_json(c));
    const Vec3 d = c.rotation().transpose() * Vec3::UnitZ();
    const Mat3 proj = Mat3::Identity() - d * d.transpose();
    a += proj;
    b += proj * c.center();
  }
  Vec3 center = Vec3::Zero();
  if (std::abs(a.determinant()) > 1e-9) {
    center = a.ldlt().solve(b);
  } else {
    for (const Camera& c : data_->cameras) center += c.center() / static_cast<double>(data_->size());
  }
  const int w = data_->images[0].width();
  const int h = data_->images[0].height();
  nlohmann::json resolutions = nlohmann::json::array();
  for (int div : {4, 2, 1}) {
    if (w % div || h % div) continue;
    const int rw = w / div, rh = h / div;
    if (rw % config_.upsample == 0 && rh % config_.upsample == 0) resolutions.push_back({{"width", rw}, {"height", rh}});
  }
  return {{"format", 1},
          {"cameras", cams},
          {"near", data_->near},
          {"far", data_->far},
          {"width", w},
          {"height", h},
          {"center", {center.x(), center.y(), center.z()}},
          {"resolutions", resolutions},
          {"render", render_config_to_json(config_)},
          {"pool", pool_}};
}

RenderOutput ServiceSession::render(const Camera& camera) const {
  try {
    RenderOutput out = renderer_->render(camera, params_, config_, pool_);
    std::lock_guard lock(counters_mutex_);
    auto& s = counters_.stages;
    s.encoder += out.timings.encoder;
    s.geometry += out.timings.geometry;
    s.visibility += out.timings.visibility;
    s.integration += out.timings.integration;
    s.render_head += out.timings.render_head;
    s.total += out.timings.total;
    ++counters_.frames;
    return out;
  } catch (...) {
    std::lock_guard lock(counters_mutex_);
    ++counters_.failures;
    throw;
  }
}

ServiceCounters ServiceSession::counters() const {
  std::lock_guard lock(counters_mutex_);
  return counters_;
}

nlohmann::json ServiceSession::counters_json() const {
  const ServiceCounters c = counters();
  return {{"frames", c.frames},
          {"failures", c.failures},
          {"ms",
           {{"encoder", c.stages.encoder},
            {"geometry", c.stages.geometry},
            {"visibility", c.stages.visibility},
            {"integration", c.stages.integration},
            {"render_head", c.stages.render_head},
            {"total", c.stages.total}}}};
}

namespace {

using Session = std::shared_ptr<const ServiceSession>;

std::string error_body(const std::string& message) { return nlohmann::json{{"error", message}}.dump(); }

std::string millis(double ms) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", ms);
  return buf;
}

/// Binary /stream frame: u32 little-endian header length, JSON header, PNG.
std::string stream_frame(const nlohmann::json& header, const std::vector<uint8_t>& png) {
  const std::string h = header.dump();
  const uint32_t n = static_cast<uint32_t>(h.size());
  std::string out;
  out.reserve(4 + h.size() + png.size());
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((n >> (8 * k)) & 0xff));
  out += h;
  out.append(reinterpret_cast<const char*>(png.data()), png.size());
  return out;
}

class StreamConnection : public std::enable_shared_from_this<StreamConnection> {
 public:
  StreamConnection(tcp::socket&& socket, Session session, net::thread_pool& renders)
      : ws_(std::move(socket)), session_(std::move(session)), renders_(renders) {}

  template <class Request>
  void accept(Request req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, beast::bind_front_handler(&StreamConnection::on_accept, shared_from_this()));
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    read();
  }

  void read() {
    ws_.async_read(buffer_, beast::bind_front_handler(&StreamConnection::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      closed_ = true;
      return;
    }
    const std::string text = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    try {
      const auto body = nlohmann::json::parse(text);
      pending_ = parse_render_request(body, session_->config().upsample);  // replaces any stale pose
      if (!busy_) launch();
    } catch (const nlohmann::json::exception& e) {
      send(error_body(std::string("body: ") + e.what()), false);
    } catch (const std::exception& e) {
      send(error_body(e.what()), false);
    }
    read();
  }

  void launch() {
    busy_ = true;
    RenderRequest req = std::move(*pending_);
    pending_.reset();
    net::post(renders_, [self = shared_from_this(), req = std::move(req)]() mutable {
      std::string payload;
      bool binary = true;
      try {
        const RenderOutput out = self->session_->render(req.camera);
        const nlohmann::json header = {{"id", req.id},
                                       {"render_ms", out.timings.total},
                                       {"width", out.image.width()},
                                       {"height", out.image.height()},
                                       {"views", out.views}};
        payload = stream_frame(header, encode_png(out.image));
      } catch (const std::exception& e) {
        payload = nlohmann::json{{"id", req.id}, {"error", std::string("render failed: ") + e.what()}}.dump();
        binary = false;
      }
      net::post(self->ws_.get_executor(), [self, payload = std::move(payload), binary]() mutable {
        self->busy_ = false;
        self->send(std::move(payload), binary);
        if (self->pending_ && !self->closed_) self->launch();
      });
    });
  }

  void send(std::string payload, bool binary) {
    outbox_.push_back({std::move(payload), binary});
    if (outbox_.size() == 1) write_next();
  }

  void write_next() {
    ws_.binary(outbox_.front().second);
    ws_.async_write(net::buffer(outbox_.front().first),
                    beast::bind_front_handler(&StreamConnection::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    if (ec) {
      closed_ = true;
      outbox_.clear();
      return;
    }
    outbox_.pop_front();
    if (!outbox_.empty()) write_next();
  }

  websocket::stream<beast::tcp_stream> ws_;
  Session session_;
  net::thread_pool& renders_;
  beast::flat_buffer buffer_;
  std::optional<RenderRequest> pending_;
  bool busy_ = false;
  bool closed_ = false;
  std::deque<std::pair<std::string, bool>> outbox_;
};

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
 public:
  HttpConnection(tcp::socket&& socket, Session session, net::thread_pool& renders)
      : stream_(std::move(socket)), session_(std::move(session)), renders_(renders) {}

  void run() {
    net::dispatch(stream_.get_executor(), beast::bind_front_handler(&HttpConnection::read, shared_from_this()));
  }

 private:
  using Response = http::response<http::string_body>;

  void read() {
    parser_.emplace();
    parser_->body_limit(1 << 20);
    stream_.expires_after(std::chrono::seconds(60));
    http::async_read(stream_, buffer_, *parser_, beast::bind_front_handler(&HttpConnection::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
      return;
    }
    auto req = parser_->release();
    if (websocket::is_upgrade(req)) {
      if (req.target() == "/stream") {
        stream_.expires_never();
        std::make_shared<StreamConnection>(stream_.release_socket(), session_, renders_)->accept(std::move(req));
        return;
      }
      respond(req, text_response(req, http::status::not_found, error_body("no WebSocket endpoint here")));
      return;
    }
    handle(std::move(req));
  }

  template <class Req>
  Response text_response(const Req& req, http::status status, std::string body,
                          const char* type = "application/json") {
    Response res{status, req.version()};
    res.set(http::field::server, "evr");
    res.set(http::field::content_type, type);
    res.set(http::field::access_control_allow_origin, "*");
    res.keep_alive(req.keep_alive());
    res.body() = std::move(body);
    res.prepare_payload();
    return res;
  }

  void handle(http::request<http::string_body> req) {
    const std::string target(req.target());
    if (req.method() == http::verb::get && target == "/scene") {
      return respond(req, text_response(req, http::status::ok, session_->scene_json().dump()));
    }
    if (req.method() == http::verb::get && target == "/stats") {
      return respond(req, text_response(req, http::status::ok, session_->counters_json().dump()));
    }
    if (target == "/render") {
      if (req.method() != http::verb::post) {
        return respond(req, text_response(req, http::status::method_not_allowed, error_body("use POST")));
      }
      RenderRequest parsed;
      try {
        parsed = parse_render_request(nlohmann::json::parse(req.body()), session_->config().upsample);
      } catch (const nlohmann::json::exception& e) {
        return respond(req, text_response(req, http::status::bad_request, error_body(std::string("body: ") + e.what())));
      } catch (const std::exception& e) {
        return respond(req, text_response(req, http::status::bad_request, error_body(e.what())));
      }
      net::post(renders_, [self = shared_from_this(), req = std::move(req), parsed = std::move(parsed)]() mutable {
        Response res;
        try {
          const RenderOutput out = self->session_->render(parsed.camera);
          const auto png = encode_png(out.image);
          res = self->text_response(req, http::status::ok, std::string(png.begin(), png.end()), "image/png");
          res.set("X-Render-Millis", millis(out.timings.total));
          res.set(http::field::access_control_expose_headers, "X-Render-Millis");
        } catch (const std::exception& e) {
          res = self->text_response(req, http::status::internal_server_error,
                                    error_body(std::string("render failed: ") + e.what()));
        }
        net::post(self->stream_.get_executor(),
                  [self, req = std::move(req), res = std::move(res)]() mutable { self->respond(req, std::move(res)); });
      });
      return;
    }
    respond(req, text_response(req, http::status::not_found, error_body("unknown endpoint " + target)));
  }

  void respond(const http::request<http::string_body>& req, Response res) {
    (void)req;
    auto sp = std::make_shared<Response>(std::move(res));
    http::async_write(stream_, *sp, [self = shared_from_this(), sp](beast::error_code ec, std::size_t) {
      if (ec) return;
      if (!sp->keep_alive()) {
        beast::error_code ignored;
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        return;
      }
      self->read();
    });
  }

  beast::tcp_stream stream_;
  Session session_;
  net::thread_pool& renders_;
  beast::flat_buffer buffer_;
  std::optional<http::request_parser<http::string_body>> parser_;
};

}  // namespace

struct RenderService::Impl {
  Session session;
  ServiceOptions options;
  net::io_context ioc;
  net::thread_pool renders;
  tcp::acceptor acceptor;
  std::vector<std::thread> threads;
  std::mutex mutex;
  std::condition_variable stopped_cv;
  bool running = false;

  Impl(Session s, ServiceOptions o)
      : session(std::move(s)),
        options(std::move(o)),
        ioc(std::max(1, options.io_threads)),
        renders(static_cast<std::size_t>(std::max(1, options.render_threads))),
        acceptor(net::make_strand(ioc)) {}

  void accept() {
    acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
      if (ec == net::error::operation_aborted) return;
      if (!ec) std::make_shared<HttpConnection>(std::move(socket), session, renders)->run();
      accept();
    });
  }
};

RenderService::RenderService(std::shared_ptr<const ServiceSession> session, ServiceOptions options)
    : impl_(std::make_unique<Impl>(std::move(session), std::move(options))) {}

RenderService::~RenderService() { stop(); }

uint16_t RenderService::start() {
  auto& im = *impl_;
  beast::error_code ec;
  const auto address = net::ip::make_address(im.options.address, ec);
  if (ec) throw IoError("serve: bad address " + im.options.address + ": " + ec.message());
  const tcp::endpoint endpoint(address, im.options.port);
  im.acceptor.open(endpoint.protocol(), ec);
  if (!ec) im.acceptor.set_option(net::socket_base::reuse_address(true), ec);
  if (!ec) im.acceptor.bind(endpoint, ec);
  if (!ec) im.acceptor.listen(net::socket_base::max_listen_connections, ec);
  if (ec) {
    throw IoError("serve: cannot listen on " + im.options.address + ":" + std::to_string(im.options.port) + ": " +
                  ec.message());
  }
  const uint16_t port = im.acceptor.local_endpoint().port();
  im.accept();
  {
    std::lock_guard lock(im.mutex);
    im.running = true;
  }
  for (int i = 0; i < std::max(1, im.options.io_threads); ++i) im.threads.emplace_back([&im] { im.ioc.run(); });
  return port;
}

void RenderService::wait() {
  auto& im = *impl_;
  std::unique_lock lock(im.mutex);
  im.stopped_cv.wait(lock, [&] { return !im.running; });
}

void RenderService::stop() {
  if (!impl_) return;
  auto& im = *impl_;
  {
    std::lock_guard lock(im.mutex);
    if (!im.running && im.threads.empty()) return;
    im.running = false;
  }
  im.stopped_cv.notify_all();
  net::post(im.acceptor.get_executor(), [&im] {
    beast::error_code ignored;
    im.acceptor.close(ignored);
  });
  im.renders.join();
  im.ioc.stop();
  for (auto& t : im.threads) {
    if (t.joinable() && t.get_id() != std::this_thread::get_id()) t.join();
  }
  im.threads.clear();
}

}  // namespace evr
