#pragma once

// In-process stand-in for the works API, served over loopback HTTP.
//
//   GET /works?filter=primary_location.source.id:<J>,publication_year:<a>-<b>&per-page=<n>&cursor=<c>
//   GET /works?filter=openalex:<W1>|<W2>...&per-page=<n>
//
// Cursors are "*" for the first page and "p<k>" afterwards; the last page
// carries a null next_cursor.

#include <atomic>
#include <chrono>
#include <deque>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"

namespace mock {

using json = nlohmann::json;

struct Work {
  std::string id;  // full URL form
  std::string journal;
  int year = 2000;
  std::vector<std::string> refs;
  std::string type = "journal";
};

class Api {
 public:
  Api() {
    server_.Get("/works", [this](const httplib::Request& req, httplib::Response& res) { handle(req, res); });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~Api() {
    server_.stop();
    thread_.join();
  }
  Api(const Api&) = delete;
  Api& operator=(const Api&) = delete;

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  void add(Work w) {
    std::lock_guard lock(mutex_);
    by_id_[short_of(w.id)] = w;
    works_.push_back(std::move(w));
  }

  // Statuses returned, in order, before normal service resumes.
  void fail_next(std::vector<int> statuses) {
    std::lock_guard lock(mutex_);
    failures_.insert(failures_.end(), statuses.begin(), statuses.end());
  }
  void fail_always(int status) {
    std::lock_guard lock(mutex_);
    always_ = status;
  }

  std::size_t requests() const {
    std::lock_guard lock(mutex_);
    return stamps_.size();
  }
  std::vector<std::chrono::steady_clock::time_point> stamps() const {
    std::lock_guard lock(mutex_);
    return stamps_;
  }
  std::vector<std::string> headers(const std::string& name) const {
    std::lock_guard lock(mutex_);
    auto it = seen_headers_.find(name);
    return it == seen_headers_.end() ? std::vector<std::string>{} : it->second;
  }

  static std::string short_of(const std::string& id) {
    auto s = id.rfind('/');
    return s == std::string::npos ? id : id.substr(s + 1);
  }

 private:
  static json to_json(const Work& w) {
    json refs = json::array();
    for (const auto& r : w.refs) refs.push_back(r);
    json src = w.journal.empty() ? json(nullptr) : json{{"id", w.journal}, {"type", w.type}};
    return {{"id", w.id},
            {"publication_year", w.year},
            {"type", "article"},
            {"primary_location", {{"source", src}}},
            {"referenced_works", refs}};
  }

  void handle(const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(mutex_);
    stamps_.push_back(std::chrono::steady_clock::now());
    if (req.has_header("Authorization")) seen_headers_["Authorization"].push_back(req.get_header_value("Authorization"));
    if (always_) {
      res.status = always_;
      res.set_content("{\"error\":\"mock\"}", "application/json");
      return;
    }
    if (!failures_.empty()) {
      res.status = failures_.front();
      failures_.pop_front();
      res.set_content("{\"error\":\"mock\"}", "application/json");
      return;
    }
    const auto filter = req.get_param_value("filter");
    const int per_page = req.has_param("per-page") ? std::stoi(req.get_param_value("per-page")) : 25;
    json body;
    body["results"] = json::array();
    if (filter.rfind("openalex:", 0) == 0) {
      std::string rest = filter.substr(9);
      std::size_t at = 0;
      while (at <= rest.size()) {
        const auto bar = rest.find('|', at);
        const auto id = rest.substr(at, bar == std::string::npos ? std::string::npos : bar - at);
        auto it = by_id_.find(id);
        if (it != by_id_.end()) body["results"].push_back(to_json(it->second));
        if (bar == std::string::npos) break;
        at = bar + 1;
      }
      body["meta"] = {{"next_cursor", nullptr}};
    } else {
      // primary_location.source.id:<J>,publication_year:<a>-<b>
      const auto comma = filter.find(',');
      const auto journal = filter.substr(filter.find(':') + 1, comma - filter.find(':') - 1);
      const auto years = filter.substr(filter.find(':', comma) + 1);
      const int lo = std::stoi(years.substr(0, years.find('-')));
      const int hi = std::stoi(years.substr(years.find('-') + 1));
      std::vector<const Work*> hits;
      for (const auto& w : works_) {
        if (w.journal == journal && w.year >= lo && w.year <= hi) hits.push_back(&w);
      }
      const auto cursor = req.get_param_value("cursor");
      const std::size_t page = cursor == "*" ? 0 : std::stoul(cursor.substr(1));
      const std::size_t begin = page * static_cast<std::size_t>(per_page);
      for (std::size_t i = begin; i < hits.size() && i < begin + static_cast<std::size_t>(per_page); ++i) {
        body["results"].push_back(to_json(*hits[i]));
      }
      const bool more = begin + static_cast<std::size_t>(per_page) < hits.size();
      body["meta"] = {{"next_cursor", more ? json("p" + std::to_string(page + 1)) : json(nullptr)},
                      {"count", hits.size()}};
    }
    res.set_content(body.dump(), "application/json");
  }

  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  mutable std::mutex mutex_;
  std::vector<Work> works_;
  std::map<std::string, Work> by_id_;
  std::deque<int> failures_;
  int always_ = 0;
  std::vector<std::chrono::steady_clock::time_point> stamps_;
  std::map<std::string, std::vector<std::string>> seen_headers_;
};

}  // namespace mock
