#include "acme/realnet/node.hpp"

#include "acme/ising/query.hpp"

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/read.hpp>
#include <boost/asio/write.hpp>
#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>

#include <condition_variable>
#include <deque>
#include <fstream>
#include <future>
#include <set>
#include <sstream>

namespace acme::realnet {

namespace asio = boost::asio;
using tcp = asio::ip::tcp;
using json = nlohmann::json;

// ---- configuration ----

const PeerAddress* ClusterConfig::find(const std::string& name) const {
    for (const auto& n : nodes) {
        if (n.name == name) return &n;
    }
    return nullptr;
}

ClusterConfig parse_cluster_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("cluster config: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("cluster config: expected an object");
    static const std::set<std::string> keys{"qtree_port", "ising_port", "topology", "roots",
                                            "nodes",      "digits",     "compute_max_ms", "latency_max_ms"};
    for (const auto& [k, v] : j.items()) {
        if (!keys.count(k)) throw std::invalid_argument("cluster config: unknown field '" + k + "'");
    }
    ClusterConfig c;
    try {
        c.qtree_port = j.value("qtree_port", c.qtree_port);
        c.ising_port = j.value("ising_port", c.ising_port);
        c.digits = j.value("digits", c.digits);
        c.ising.compute_max_ms = j.value("compute_max_ms", c.ising.compute_max_ms);
        c.ising.latency_max_ms = j.value("latency_max_ms", c.ising.latency_max_ms);
        if (j.contains("topology")) c.ising.kind = qtree::topology_from_string(j.at("topology").get<std::string>());
        if (!j.contains("nodes") || !j.at("nodes").is_array() || j.at("nodes").empty()) {
            throw std::invalid_argument("nodes: expected a non-empty array");
        }
        for (const auto& n : j.at("nodes")) {
            PeerAddress p;
            p.name = n.at("name").get<std::string>();
            p.host = n.value("host", p.host);
            p.port_offset = n.value("port_offset", 0);
            if (p.name.empty()) throw std::invalid_argument("nodes: empty name");
            if (c.find(p.name)) throw std::invalid_argument("nodes: duplicate name '" + p.name + "'");
            c.nodes.push_back(p);
        }
        if (j.contains("roots")) c.roots = j.at("roots").get<std::vector<std::string>>();
        if (c.roots.empty()) c.roots.push_back(c.nodes.front().name);
        for (const auto& r : c.roots) {
            if (!c.find(r)) throw std::invalid_argument("roots: unknown node '" + r + "'");
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("cluster config: ") + e.what());
    }
    return c;
}

ClusterConfig load_cluster_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot read cluster config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_cluster_config(ss.str());
}

std::string format_cluster_config(const ClusterConfig& c) {
    json j;
    j["qtree_port"] = c.qtree_port;
    j["ising_port"] = c.ising_port;
    j["topology"] = std::string(qtree::to_string(c.ising.kind));
    j["roots"] = c.roots;
    j["digits"] = c.digits;
    json nodes = json::array();
    for (const auto& n : c.nodes) nodes.push_back({{"name", n.name}, {"host", n.host}, {"port_offset", n.port_offset}});
    j["nodes"] = nodes;
    return j.dump(2) + "\n";
}

ClusterConfig loopback_cluster(std::size_t n, int stride, std::uint16_t qtree_port, std::uint16_t ising_port) {
    ClusterConfig c;
    c.qtree_port = qtree_port;
    c.ising_port = ising_port;
    for (std::size_t i = 0; i < n; ++i) {
        c.nodes.push_back(PeerAddress{"n" + std::to_string(i), "127.0.0.1", static_cast<int>(i) * stride});
    }
    if (n > 0) c.roots = {"n0"};
    return c;
}

std::pair<std::string, int> split_host_port(const std::string& text) {
    const auto colon = text.rfind(':');
    if (colon == std::string::npos || colon == 0) throw std::invalid_argument("expected host:port, got '" + text + "'");
    try {
        std::size_t used = 0;
        const int port = std::stoi(text.substr(colon + 1), &used);
        if (used != text.size() - colon - 1 || port <= 0 || port > 65535) throw std::invalid_argument("port");
        return {text.substr(0, colon), port};
    } catch (const std::exception&) {
        throw std::invalid_argument("bad port in '" + text + "'");
    }
}

std::optional<std::string> http_get(const std::string& host, int port, const std::string& path_and_query,
                                    double timeout_ms) {
    httplib::Client cli(host, port);
    const auto us = std::chrono::microseconds(static_cast<std::int64_t>(timeout_ms * 1000.0));
    cli.set_connection_timeout(us);
    cli.set_read_timeout(us);
    cli.set_write_timeout(us);
    auto res = cli.Get(path_and_query);
    if (!res || res->status != 200) return std::nullopt;
    return res->body;
}

// ---- QTree links ----

class RealNode::Links {
public:
    Links(RealNode& owner, asio::io_context& io) : owner_(owner), io_(io), acceptor_(io) {}

    void listen(const std::string& host, int port) {
        tcp::endpoint ep(asio::ip::make_address(host), static_cast<std::uint16_t>(port));
        acceptor_.open(ep.protocol());
        acceptor_.set_option(tcp::acceptor::reuse_address(true));
        acceptor_.bind(ep);
        acceptor_.listen();
        accept();
    }

    void send(const qtree::NodeId& to, const PeerAddress& addr, std::string bytes) {
        auto& out = out_[to];
        if (!out) {
            out = std::make_shared<Outgoing>(io_);
            out->queue.push_back(qtree::length_prefixed(owner_.id_.to_string()));
            connect(to, out, addr);
        }
        out->queue.push_back(qtree::length_prefixed(bytes));
        if (out->connected && !out->writing) write(to, out);
    }

    void close() {
        boost::system::error_code ec;
        acceptor_.close(ec);
        for (auto& [id, o] : out_) o->socket.close(ec);
        for (auto& in : in_) in->socket.close(ec);
        out_.clear();
        in_.clear();
    }

private:
    struct Outgoing {
        explicit Outgoing(asio::io_context& io) : socket(io) {}
        tcp::socket socket;
        std::deque<std::string> queue;
        bool connected = false;
        bool writing = false;
    };
    struct Incoming {
        explicit Incoming(asio::io_context& io) : socket(io) {}
        tcp::socket socket;
        unsigned char header[4] = {};
        std::string body;
        std::optional<qtree::NodeId> from;
    };

    void connect(const qtree::NodeId& to, const std::shared_ptr<Outgoing>& out, const PeerAddress& addr) {
        tcp::endpoint ep(asio::ip::make_address(addr.host), static_cast<std::uint16_t>(addr.port(owner_.config_.qtree_port)));
        out->socket.async_connect(ep, [this, to, out](const boost::system::error_code& ec) {
            if (ec) {
                drop(to, out);
                return;
            }
            out->connected = true;
            write(to, out);
        });
    }

    void write(const qtree::NodeId& to, const std::shared_ptr<Outgoing>& out) {
        if (out->queue.empty()) {
            out->writing = false;
            return;
        }
        out->writing = true;
        asio::async_write(out->socket, asio::buffer(out->queue.front()),
                          [this, to, out](const boost::system::error_code& ec, std::size_t) {
                              if (ec) {
                                  drop(to, out);
                                  return;
                              }
                              out->queue.pop_front();
                              write(to, out);
                          });
    }

    void drop(const qtree::NodeId& to, const std::shared_ptr<Outgoing>& out) {
        auto it = out_.find(to);
        if (it != out_.end() && it->second == out) out_.erase(it);
        boost::system::error_code ec;
        out->socket.close(ec);
    }

    void accept() {
        auto in = std::make_shared<Incoming>(io_);
        acceptor_.async_accept(in->socket, [this, in](const boost::system::error_code& ec) {
            if (ec) return;
            in_.push_back(in);
            read_header(in);
            accept();
        });
    }

    void read_header(const std::shared_ptr<Incoming>& in) {
        asio::async_read(in->socket, asio::buffer(in->header), [this, in](const boost::system::error_code& ec, std::size_t) {
            if (ec) return forget(in);
            const std::uint32_t len = (std::uint32_t{in->header[0]} << 24) | (std::uint32_t{in->header[1]} << 16) |
                                      (std::uint32_t{in->header[2]} << 8) | std::uint32_t{in->header[3]};
            if (len > (64u << 20)) return forget(in);
            in->body.resize(len);
            asio::async_read(in->socket, asio::buffer(in->body), [this, in](const boost::system::error_code& ec2, std::size_t) {
                if (ec2) return forget(in);
                try {
                    if (!in->from) {
                        in->from = qtree::NodeId::parse(in->body);
                    } else {
                        owner_.qtree_->on_frame(*in->from, qtree::decode_frame(in->body));
                    }
                } catch (const std::exception&) {
                    return forget(in);
                }
                read_header(in);
            });
        });
    }

    void forget(const std::shared_ptr<Incoming>& in) {
        boost::system::error_code ec;
        in->socket.close(ec);
        in_.erase(std::remove(in_.begin(), in_.end(), in), in_.end());
    }

    RealNode& owner_;
    asio::io_context& io_;
    tcp::acceptor acceptor_;
    std::map<qtree::NodeId, std::shared_ptr<Outgoing>> out_;
    std::vector<std::shared_ptr<Incoming>> in_;
};

// ---- HTTP ----

class RealNode::Http {
public:
    ~Http() { stop(); }

    httplib::Server& add(const std::string& host, int port) {
        auto s = std::make_unique<httplib::Server>();
        if (!s->bind_to_port(host, port)) throw std::runtime_error(fmt::format("cannot bind {}:{}", host, port));
        servers_.push_back(std::move(s));
        return *servers_.back();
    }

    void run() {
        for (auto& s : servers_) threads_.emplace_back([srv = s.get()] { srv->listen_after_bind(); });
    }

    void stop() {
        for (auto& s : servers_) s->stop();
        for (auto& t : threads_) t.join();
        threads_.clear();
        servers_.clear();
    }

private:
    std::vector<std::unique_ptr<httplib::Server>> servers_;
    std::vector<std::thread> threads_;
};

// ---- node ----

RealNode::RealNode(ClusterConfig config, const std::string& name) : config_(std::move(config)) {
    const auto* self = config_.find(name);
    if (!self) throw std::invalid_argument("node '" + name + "' is not in the cluster config");
    self_ = *self;
    std::vector<qtree::NodeId> ids;
    for (const auto& n : config_.nodes) {
        auto id = qtree::node_id_from_name(n.name, config_.digits);
        if (!peers_.emplace(id, n).second) throw std::runtime_error("NodeId collision for " + n.name);
        ids.push_back(id);
        if (n.name == name) id_ = id;
    }
    // No latency measurements: every candidate ties and the smaller NodeId wins.
    membership_ = std::make_shared<qtree::Membership>(std::move(ids),
                                                      [](const qtree::NodeId&, const qtree::NodeId&) { return 1.0; });
    qtree_ = std::make_unique<qtree::QTreeNode>(id_, membership_, static_cast<qtree::FrameTransport&>(*this));
    ising_ = std::make_unique<ising::IsingNode>(*qtree_, static_cast<ising::IsingEnv&>(*this), config_.ising);
    is_root_ = std::find(config_.roots.begin(), config_.roots.end(), name) != config_.roots.end();
}

RealNode::~RealNode() { stop(); }

sensact::SensorServer& RealNode::server(std::uint16_t port) {
    if (started_) throw std::logic_error("sensor servers are fixed once the node has started");
    auto& s = servers_[port];
    if (!s) s = std::make_unique<sensact::SensorServer>(port);
    return *s;
}

std::string RealNode::root_source() const {
    return self_.host + ":" + std::to_string(self_.port(config_.ising_port));
}

void RealNode::start() {
    if (started_) return;
    started_ = true;
    links_ = std::make_unique<Links>(*this, loop_.io());
    links_->listen(self_.host, self_.port(config_.qtree_port));
    http_ = std::make_unique<Http>();
    for (auto& [port, srv] : servers_) {
        auto* ss = srv.get();
        http_->add(self_.host, self_.port(port)).Get(R"(/[^/]*)", [ss](const httplib::Request& req, httplib::Response& res) {
            auto r = ss->serve(req.target, req.remote_addr);
            res.status = r.status;
            res.set_content(r.body, "text/csv");
        });
    }
    auto& ising_http = http_->add(self_.host, self_.port(config_.ising_port));
    ising_http.Get("/ising", [this](const httplib::Request& req, httplib::Response& res) {
        if (!is_root_) {
            res.status = 503;
            res.set_content("ERROR,not an ISING root\n", "text/csv");
            return;
        }
        ising::SensorQuery q;
        try {
            q = ising::parse_query(req.target);
        } catch (const std::exception& e) {
            res.status = 400;
            res.set_content(std::string("ERROR,") + e.what() + "\n", "text/csv");
            return;
        }
        if (q.is_snapshot()) {
            auto promise = std::make_shared<std::promise<std::string>>();
            auto future = promise->get_future();
            loop_.run_in_loop([this, q, promise] {
                if (!ising_->tree()) ising_->start_root();
                ising_->submit(q, [promise](const ising::EpochResult& r) {
                    if (r.last) promise->set_value(format_tuples(r.tuples));
                });
            });
            if (future.wait_for(std::chrono::seconds(60)) != std::future_status::ready) {
                res.status = 504;
                res.set_content("ERROR,query timed out\n", "text/csv");
                return;
            }
            res.set_content(future.get(), "text/csv");
            return;
        }
        struct Channel {
            std::mutex mutex;
            std::condition_variable cv;
            std::deque<std::string> blocks;
            std::optional<ising::QueryId> id;
        };
        auto ch = std::make_shared<Channel>();
        run_sync([this, q, ch] {
            if (!ising_->tree()) ising_->start_root();
            ch->id = ising_->submit(q, [ch](const ising::EpochResult& r) {
                std::lock_guard lock(ch->mutex);
                ch->blocks.push_back(format_tuples(r.tuples) + "\n");
                ch->cv.notify_one();
            });
        });
        res.set_chunked_content_provider(
            "text/csv",
            [ch](std::size_t, httplib::DataSink& sink) {
                std::unique_lock lock(ch->mutex);
                ch->cv.wait_for(lock, std::chrono::seconds(1), [&] { return !ch->blocks.empty(); });
                while (!ch->blocks.empty()) {
                    auto block = std::move(ch->blocks.front());
                    ch->blocks.pop_front();
                    if (!sink.write(block.data(), block.size())) return false;
                }
                return sink.is_writable();
            },
            [this, ch, alive = alive_](bool) {
                if (!*alive || !ch->id) return;
                const auto id = *ch->id;
                loop_.run_in_loop([this, id] { ising_->cancel(id); });
            });
    });
    http_->run();
    loop_.start();
}

void RealNode::stop() {
    if (!started_) return;
    started_ = false;
    *alive_ = false;
    if (http_) http_->stop();
    if (links_) {
        auto* links = links_.get();
        run_sync([links] { links->close(); });
    }
    loop_.stop();
    links_.reset();
}

void RealNode::run_sync(std::function<void()> fn) {
    std::promise<void> done;
    auto f = done.get_future();
    loop_.run_in_loop([&] {
        fn();
        done.set_value();
    });
    f.wait();
}

void RealNode::send(const qtree::NodeId& to, qtree::Frame frame) {
    auto it = peers_.find(to);
    if (it == peers_.end() || !links_) return;
    links_->send(to, it->second, qtree::encode_frame(frame));
}

void RealNode::fetch(const std::optional<std::string>& host, std::uint16_t port, const std::string& sensor,
                     const std::string& args, FetchDone done) {
    const auto url = sensact::sensor_url(sensor, args);
    if (!host || *host == self_.name) {
        std::optional<std::string> body;
        auto it = servers_.find(port);
        if (it != servers_.end()) {
            auto r = it->second->serve(url, self_.name);
            if (r.status == 200) body = std::move(r.body);
        }
        loop_.post([body = std::move(body), done = std::move(done)] { done(body); });
        return;
    }
    const auto* peer = config_.find(*host);
    if (!peer) {
        loop_.post([done = std::move(done)] { done(std::nullopt); });
        return;
    }
    auto alive = alive_;
    auto io = loop_.io_ptr();
    std::thread([alive, io, host = peer->host, p = peer->port(port), url, done = std::move(done)]() mutable {
        auto body = http_get(host, p, url, 5000.0);
        if (!*alive) return;
        boost::asio::post(*io, [alive, body = std::move(body), done = std::move(done)] {
            if (*alive) done(body);
        });
    }).detach();
}

}  // namespace acme::realnet
