#pragma once

#include "navsim/common.hpp"

#include <any>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <typeindex>
#include <vector>

namespace navsim {

class BusError : public Error {
 public:
  using Error::Error;
};

template <typename T>
struct Message {
  std::string topic;
  double stamp = 0.0;  // simulation time
  std::uint64_t seq = 0;
  const T& data;
};

/// In-process publish/subscribe bus. Topics are declared up front with a
/// nominal rate and payload type; publishing stamps messages with the bus
/// clock (simulation time) and delivers synchronously in subscription order.
class TopicBus {
 public:
  struct TopicInfo {
    double rate_hz = 0.0;  // 0 = event-driven
    std::type_index type = typeid(void);
    std::uint64_t count = 0;
  };

  template <typename T>
  void declare(const std::string& name, double rate_hz) {
    auto [it, inserted] = topics_.try_emplace(name, Topic{});
    if (!inserted) throw BusError("topic declared twice: " + name);
    it->second.info.rate_hz = rate_hz;
    it->second.info.type = typeid(T);
  }

  bool declared(const std::string& name) const { return topics_.count(name) != 0; }

  template <typename T>
  void subscribe(const std::string& name, std::function<void(const Message<T>&)> fn) {
    Topic& tp = topic<T>(name);
    tp.subscribers.push_back([fn = std::move(fn)](const Message<std::any>& m) {
      fn(Message<T>{m.topic, m.stamp, m.seq, *std::any_cast<const T*>(m.data)});
    });
  }

  template <typename T>
  void publish(const std::string& name, const T& value) {
    Topic& tp = topic<T>(name);
    const std::uint64_t seq = ++tp.info.count;
    const std::any ptr = &value;
    const Message<std::any> m{name, now_, seq, ptr};
    for (auto& s : tp.subscribers) s(m);
  }

  void set_time(double t) { now_ = t; }
  double now() const { return now_; }

  std::uint64_t count(const std::string& name) const {
    auto it = topics_.find(name);
    if (it == topics_.end()) throw BusError("undeclared topic: " + name);
    return it->second.info.count;
  }

  std::map<std::string, TopicInfo> topics() const {
    std::map<std::string, TopicInfo> out;
    for (const auto& [k, v] : topics_) out.emplace(k, v.info);
    return out;
  }

 private:
  struct Topic {
    TopicInfo info;
    std::vector<std::function<void(const Message<std::any>&)>> subscribers;
  };

  template <typename T>
  Topic& topic(const std::string& name) {
    auto it = topics_.find(name);
    if (it == topics_.end()) throw BusError("undeclared topic: " + name);
    if (it->second.info.type != std::type_index(typeid(T)))
      throw BusError("payload type mismatch on topic: " + name);
    return it->second;
  }

  std::map<std::string, Topic> topics_;
  double now_ = 0.0;
};

}  // namespace navsim
