#include "evr/errors.hpp"
#include "evr/image_io.hpp"
#include "evr/metrics.hpp"
#include "evr/service.hpp"

#include "scenes.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <functional>
#include <fstream>
#include <sstream>

using namespace evr;
using nlohmann::json;

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes `text` when EVR_UPDATE_FIXTURES is set, then returns the checked-in copy.
std::string golden(const std::string& name, const std::string& text) {
  const std::string path = std::string(EVR_FIXTURE_DIR) + "/" + name;
  if (std::getenv("EVR_UPDATE_FIXTURES")) std::ofstream(path, std::ios::binary) << text;
  return read_file(path);
}

Camera front_camera() { return RingRig{}.camera_at(0.0, 0.0); }

json front_request() {
  return {{"id", 0}, {"camera", camera_to_json(front_camera())}, {"width", 64}, {"height", 64}, {"quality", 90}};
}

json skewed_request() {
  json body = front_request();
  body["camera"]["rotation"][1] = 0.5;
  return body;
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ArgumentError& e) {
    return e.what();
  }
  return "";
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

struct HttpReply {
  unsigned status = 0;
  std::string body;
  std::string render_millis;
  std::string content_type;
};

HttpReply http_call(uint16_t port, http::verb verb, const std::string& target, const std::string& body = "") {
  net::io_context ioc;
  beast::tcp_stream stream(ioc);
  stream.connect(tcp::endpoint(net::ip::make_address("127.0.0.1"), port));
  http::request<http::string_body> req{verb, target, 11};
  req.set(http::field::host, "127.0.0.1");
  if (!body.empty()) {
    req.set(http::field::content_type, "application/json");
    req.body() = body;
  }
  req.prepare_payload();
  http::write(stream, req);
  beast::flat_buffer buffer;
  http::response<http::string_body> res;
  http::read(stream, buffer, res);
  beast::error_code ec;
  stream.socket().shutdown(tcp::socket::shutdown_both, ec);
  HttpReply out;
  out.status = res.result_int();
  out.body = res.body();
  if (res.count("X-Render-Millis")) out.render_millis = std::string(res["X-Render-Millis"]);
  if (res.count(http::field::content_type)) out.content_type = std::string(res[http::field::content_type]);
  return out;
}

Image png_image(const std::string& body) { return decode_png(std::vector<uint8_t>(body.begin(), body.end())); }

/// Small fitted-looking session: sphere scene, initial parameters, pool {0..4}.
class ServiceTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    MultiViewDataset data = make_dataset(generate_scene(evr::testing::small_scene_spec(), 0), 0.02);
    RenderConfig config = evr::testing::small_render();
    config.deterministic = true;
    const ModelConfig model = evr::testing::small_model();
    session_ = std::make_shared<ServiceSession>(std::move(data), model, ModelParams::initialize(model, 3), config,
                                                std::vector<int>{0, 1, 2, 3, 4});
    ServiceOptions opts;
    opts.port = 0;
    opts.render_threads = 2;
    service_ = new RenderService(session_, opts);
    port_ = service_->start();
  }
  static void TearDownTestSuite() {
    delete service_;
    service_ = nullptr;
    session_.reset();
  }

  static std::shared_ptr<ServiceSession> session_;
  static RenderService* service_;
  static uint16_t port_;
};

std::shared_ptr<ServiceSession> ServiceTest::session_;
RenderService* ServiceTest::service_ = nullptr;
uint16_t ServiceTest::port_ = 0;

}  // namespace

TEST(RenderRequest, ParsesFrontPose) {
  const RenderRequest r = parse_render_request(front_request(), 4);
  EXPECT_EQ(r.id, json(0));
  EXPECT_EQ(r.quality, 90);
  EXPECT_EQ(r.camera.width(), 64);
  EXPECT_EQ(r.camera.height(), 64);
  EXPECT_EQ(r.camera, front_camera());
}

TEST(RenderRequest, DefaultsToCameraSize) {
  json body = front_request();
  body.erase("width");
  body.erase("height");
  body.erase("id");
  const RenderRequest r = parse_render_request(body, 4);
  EXPECT_TRUE(r.id.is_null());
  EXPECT_EQ(r.camera.width(), front_camera().width());
}

TEST(RenderRequest, FieldLevelMessages) {
  EXPECT_EQ(error_of([] { parse_render_request(skewed_request(), 4); }).rfind("camera.rotation:", 0), 0u);
  json body = front_request();
  body["camera"].erase("fx");
  EXPECT_EQ(error_of([&] { parse_render_request(body, 4); }).rfind("camera.fx", 0), 0u);
  body = front_request();
  body["width"] = 66;
  EXPECT_EQ(error_of([&] { parse_render_request(body, 4); }).rfind("width:", 0), 0u);
  body = front_request();
  body["height"] = "tall";
  EXPECT_EQ(error_of([&] { parse_render_request(body, 4); }).rfind("height:", 0), 0u);
  body = front_request();
  body["quality"] = 0;
  EXPECT_EQ(error_of([&] { parse_render_request(body, 4); }).rfind("quality:", 0), 0u);
  body.erase("camera");
  EXPECT_EQ(error_of([&] { parse_render_request(body, 4); }), "camera: missing");
  EXPECT_EQ(error_of([] { parse_render_request(json::array(), 4); }).rfind("body:", 0), 0u);
}

TEST(RenderRequest, GoldenRequestFixture) {
  const std::string text = front_request().dump(2) + "\n";
  const std::string fixture = golden("render_request_front.json", text);
  ASSERT_FALSE(fixture.empty());
  EXPECT_EQ(text, fixture);
  EXPECT_EQ(parse_render_request(json::parse(fixture), 4).camera, front_camera());
}

TEST(RenderRequest, GoldenErrorFixture) {
  const std::string message = error_of([] { parse_render_request(skewed_request(), 4); });
  const std::string text = json{{"error", message}}.dump(2) + "\n";
  const std::string fixture = golden("render_error_rotation.json", text);
  ASSERT_FALSE(fixture.empty());
  EXPECT_EQ(text, fixture);
}

TEST_F(ServiceTest, SceneDescribesRig) {
  const HttpReply r = http_call(port_, http::verb::get, "/scene");
  ASSERT_EQ(r.status, 200u);
  const json scene = json::parse(r.body);
  for (const char* key : {"format", "cameras", "near", "far", "width", "height", "center", "resolutions", "render",
                          "pool"}) {
    EXPECT_TRUE(scene.contains(key)) << key;
  }
  EXPECT_EQ(scene["cameras"].size(), 5u);
  EXPECT_EQ(camera_from_json(scene["cameras"][2]), session_->dataset().cameras[2]);
  const auto c = scene["center"].get<std::vector<double>>();
  ASSERT_EQ(c.size(), 3u);
  EXPECT_LT(Vec3(c[0], c[1], c[2]).norm(), 1e-6);
  EXPECT_FALSE(scene["resolutions"].empty());
}

TEST_F(ServiceTest, RenderMatchesEval) {
  const int view = 2;
  json body = {{"camera", camera_to_json(session_->dataset().cameras[view])}};
  const HttpReply r = http_call(port_, http::verb::post, "/render", body.dump());
  ASSERT_EQ(r.status, 200u) << r.body;
  EXPECT_EQ(r.content_type, "image/png");
  EXPECT_FALSE(r.render_millis.empty());
  const Image served = png_image(r.body);
  const Image& truth = session_->dataset().images[view];
  ASSERT_EQ(served.width(), truth.width());
  // what eval reports: the float render against the same image
  const double reported = psnr(session_->render(session_->dataset().cameras[view]).image, truth);
  EXPECT_GE(psnr(served, truth), reported - 0.1);
}

TEST_F(ServiceTest, RejectsBadRequests) {
  HttpReply r = http_call(port_, http::verb::post, "/render", skewed_request().dump());
  EXPECT_EQ(r.status, 400u);
  EXPECT_EQ(json::parse(r.body)["error"].get<std::string>().rfind("camera.rotation:", 0), 0u);
  r = http_call(port_, http::verb::post, "/render", "{not json");
  EXPECT_EQ(r.status, 400u);
  EXPECT_EQ(http_call(port_, http::verb::get, "/render").status, 405u);
  EXPECT_EQ(http_call(port_, http::verb::get, "/nowhere").status, 404u);
}

TEST_F(ServiceTest, StatsCountFrames) {
  const uint64_t before = json::parse(http_call(port_, http::verb::get, "/stats").body)["frames"];
  json body = front_request();
  body["width"] = 16;
  body["height"] = 16;
  ASSERT_EQ(http_call(port_, http::verb::post, "/render", body.dump()).status, 200u);
  const json stats = json::parse(http_call(port_, http::verb::get, "/stats").body);
  EXPECT_EQ(stats["frames"].get<uint64_t>(), before + 1);
  EXPECT_GT(stats["ms"]["total"].get<double>(), 0.0);
}

TEST_F(ServiceTest, StreamNewestPoseWins) {
  net::io_context ioc;
  websocket::stream<beast::tcp_stream> ws(ioc);
  beast::get_lowest_layer(ws).connect(tcp::endpoint(net::ip::make_address("127.0.0.1"), port_));
  ws.handshake("127.0.0.1", "/stream");

  const std::vector<Camera>& cams = session_->dataset().cameras;
  for (int i = 0; i < 10; ++i) {
    const json msg = {{"id", i}, {"camera", camera_to_json(cams[i % cams.size()])}, {"width", 32}, {"height", 32}};
    ws.write(net::buffer(msg.dump()));
  }
  int frames = 0;
  int last = -1;
  while (last != 9 && frames < 11) {
    beast::flat_buffer buffer;
    ws.read(buffer);
    ASSERT_TRUE(ws.got_binary()) << beast::buffers_to_string(buffer.data());
    const std::string data = beast::buffers_to_string(buffer.data());
    ASSERT_GE(data.size(), 4u);
    uint32_t n = 0;
    for (int k = 0; k < 4; ++k) n |= static_cast<uint32_t>(static_cast<uint8_t>(data[k])) << (8 * k);
    const json header = json::parse(data.substr(4, n));
    EXPECT_EQ(header["width"], 32);
    EXPECT_GT(header["render_ms"].get<double>(), 0.0);
    const Image frame = png_image(data.substr(4 + n));
    EXPECT_EQ(frame.width(), 32);
    const int id = header["id"];
    EXPECT_GT(id, last);
    last = id;
    ++frames;
  }
  EXPECT_EQ(last, 9);
  EXPECT_LE(frames, 10);

  // malformed pose gets a text error tagged on the same connection
  ws.write(net::buffer(std::string("{\"camera\": 3}")));
  beast::flat_buffer buffer;
  ws.read(buffer);
  EXPECT_FALSE(ws.got_binary());
  EXPECT_TRUE(json::parse(beast::buffers_to_string(buffer.data())).contains("error"));
  ws.close(websocket::close_code::normal);
}

TEST_F(ServiceTest, RenderMillisTracksDirectTiming) {
  json body = front_request();
  std::vector<double> served, direct;
  const Camera cam = front_camera().resized(64, 64);
  session_->render(cam);  // warm-up
  for (int i = 0; i < 7; ++i) {
    const HttpReply r = http_call(port_, http::verb::post, "/render", body.dump());
    ASSERT_EQ(r.status, 200u);
    served.push_back(std::stod(r.render_millis));
    const auto t0 = std::chrono::steady_clock::now();
    session_->render(cam);
    direct.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  const double a = median(served), b = median(direct);
  EXPECT_LE(std::abs(a - b), 0.2 * b) << "served " << a << " ms, direct " << b << " ms";
}
