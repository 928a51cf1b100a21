#pragma once

#include <cstdint>
#include <fstream>
#include <memory>
#include <regex>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mctrack/error.hpp"
#include "mctrack/guidance.hpp"
#include "mctrack/io.hpp"

// After Eigen: <resolv.h> defines a `_res` macro that collides with Eigen internals.
#include <httplib.h>

namespace mctrack {

// Tabs and line breaks would corrupt the log's framing.
inline std::string sanitize_message(std::string s) {
  for (auto& c : s)
    if (c == '\t' || c == '\n' || c == '\r') c = ' ';
  return s;
}

// t_s<TAB>kind<TAB>distance_m<TAB>message
inline std::string format_alert_line(const AlertEvent& ev) {
  return io::format_double(ev.t) + "\t" + to_string(ev.kind) + "\t" + io::format_double(ev.distance) + "\t" +
         sanitize_message(ev.message) + "\n";
}

class AlertSink {
 public:
  virtual ~AlertSink() = default;
  virtual std::string name() const = 0;
  // One delivery attempt; true on success.
  virtual bool deliver(const AlertEvent& ev) = 0;
};

// Append-only event log. The file is opened on first delivery.
class FileSink final : public AlertSink {
 public:
  explicit FileSink(std::string path) : path_(std::move(path)) {}

  std::string name() const override { return "file:" + path_; }

  bool deliver(const AlertEvent& ev) override {
    if (!out_.is_open()) {
      out_.open(path_, std::ios::binary | std::ios::app);
      if (!out_) return false;
    }
    out_ << format_alert_line(ev);
    out_.flush();
    return static_cast<bool>(out_);
  }

 private:
  std::string path_;
  std::ofstream out_;
};

// HTTP POST of each event as a form-encoded key/value document. A 2xx
// response counts as delivered; there are no retries.
class WebhookSink final : public AlertSink {
 public:
  explicit WebhookSink(const std::string& url, int timeout_s = 2) : url_(url) {
    static const std::regex re(R"(^http://([^/:]+)(?::(\d+))?(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, re))
      throw ValidationError("webhook url must look like http://host[:port][/path], got '" + url + "'");
    host_ = m[1].str();
    port_ = m[2].matched ? std::stoi(m[2].str()) : 80;
    path_ = m[3].matched ? m[3].str() : "/";
    timeout_s_ = timeout_s;
  }

  std::string name() const override { return "webhook:" + url_; }

  bool deliver(const AlertEvent& ev) override {
    httplib::Client cli(host_, port_);
    cli.set_connection_timeout(timeout_s_, 0);
    cli.set_read_timeout(timeout_s_, 0);
    cli.set_write_timeout(timeout_s_, 0);
    httplib::Params params{{"id", std::to_string(ev.id)},
                           {"t_s", io::format_double(ev.t)},
                           {"kind", to_string(ev.kind)},
                           {"distance_m", io::format_double(ev.distance)},
                           {"message", ev.message}};
    auto res = cli.Post(path_, params);
    return res && res->status >= 200 && res->status < 300;
  }

 private:
  std::string url_, host_, path_;
  int port_ = 80;
  int timeout_s_ = 2;
};

struct SinkReport {
  std::string sink;
  std::size_t delivered = 0;
  std::size_t failed = 0;
  std::size_t skipped = 0;  // already attempted in this run
};

struct DeliveryReport {
  std::vector<SinkReport> sinks;

  std::size_t total_failed() const {
    std::size_t n = 0;
    for (const auto& s : sinks) n += s.failed;
    return n;
  }
};

inline std::string write_delivery_csv(const DeliveryReport& r) {
  std::string out = "sink,delivered,failed,skipped\n";
  for (const auto& s : r.sinks)
    out += s.sink + "," + std::to_string(s.delivered) + "," + std::to_string(s.failed) + "," +
           std::to_string(s.skipped) + "\n";
  return out;
}

// Fans events out to every sink. Each (event id, sink) pair is attempted at
// most once per dispatcher; a failing sink never stops the others.
class Dispatcher {
 public:
  void add_sink(std::unique_ptr<AlertSink> sink) { sinks_.push_back(std::move(sink)); }
  std::size_t sink_count() const { return sinks_.size(); }

  DeliveryReport dispatch(const std::vector<AlertEvent>& events) {
    DeliveryReport report;
    for (std::size_t s = 0; s < sinks_.size(); ++s) {
      SinkReport sr;
      sr.sink = sinks_[s]->name();
      for (const auto& ev : events) {
        if (!attempted_.insert({s, ev.id}).second) {
          ++sr.skipped;
          continue;
        }
        bool ok = false;
        try {
          ok = sinks_[s]->deliver(ev);
        } catch (const std::exception&) {
          ok = false;
        }
        ++(ok ? sr.delivered : sr.failed);
      }
      report.sinks.push_back(std::move(sr));
    }
    return report;
  }

 private:
  std::vector<std::unique_ptr<AlertSink>> sinks_;
  std::set<std::pair<std::size_t, std::uint64_t>> attempted_;
};

}  // namespace mctrack
