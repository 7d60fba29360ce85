#pragma once

#include <array>
#include <cstddef>
#include <string>

#include "vmtl/error.hpp"

namespace vmtl {

enum class Task : std::size_t { saliency = 0, action = 1, summary = 2 };

inline constexpr std::array<Task, 3> kAllTasks{Task::saliency, Task::action, Task::summary};

inline const char* task_name(Task t) {
    switch (t) {
        case Task::saliency: return "saliency";
        case Task::action: return "action";
        case Task::summary: return "summary";
    }
    return "?";
}

inline Task task_from_name(const std::string& s) {
    if (s == "saliency") return Task::saliency;
    if (s == "action") return Task::action;
    if (s == "summary") return Task::summary;
    throw ConfigError("unknown task '" + s + "' (expected saliency|action|summary)");
}

// Which heads a forward pass should evaluate.
struct TaskSet {
    std::array<bool, 3> on{false, false, false};

    static TaskSet all() { return TaskSet{{true, true, true}}; }
    static TaskSet only(Task t) {
        TaskSet s;
        s.on[static_cast<std::size_t>(t)] = true;
        return s;
    }
    bool has(Task t) const { return on[static_cast<std::size_t>(t)]; }
    void set(Task t, bool v = true) { on[static_cast<std::size_t>(t)] = v; }
    bool any() const { return on[0] || on[1] || on[2]; }
};

} // namespace vmtl
