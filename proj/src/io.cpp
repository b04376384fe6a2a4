#include "snake/io.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "snake/text.hpp"

namespace snake {

std::string trace_csv(const RolloutTrace& trace) {
  const int k = trace.n_joints();
  std::string out = "step,time_s,head_x,head_y,centroid_x,centroid_y,reward,done";
  for (const char* kind : {"angle", "rate", "torque"}) {
    for (int j = 0; j < k; ++j) {
      out += ',';
      out += kind;
      out += '_';
      out += std::to_string(j);
    }
  }
  out += '\n';
  for (int i = 0; i < trace.n_steps(); ++i) {
    const std::size_t u = static_cast<std::size_t>(i);
    out += std::to_string(i);
    out += ',' + format_number(trace.time[u]);
    out += ',' + format_number(trace.head[u].x());
    out += ',' + format_number(trace.head[u].y());
    out += ',' + format_number(trace.centroid_pos[u].x());
    out += ',' + format_number(trace.centroid_pos[u].y());
    out += ',' + format_number(trace.reward[u]);
    out += ',';
    out += trace.done[u] ? '1' : '0';
    for (const auto* column : {&trace.angles, &trace.rates, &trace.torques}) {
      for (int j = 0; j < k; ++j) {
        out += ',' + format_number((*column)[u][j]);
      }
    }
    out += '\n';
  }
  return out;
}

std::string energy_csv_header() {
  return "controller,n_joints,n_steps,time_to_goal_s,mean_velocity_mps,"
         "total_power_W,average_power_W\n";
}

std::string energy_csv_row(const std::string& controller, const EnergyReport& report) {
  std::string out = controller;
  out += ',' + std::to_string(report.n_joints);
  out += ',' + std::to_string(report.n_steps);
  out += ',' + format_number(report.time_to_goal
                                 ? *report.time_to_goal
                                 : std::numeric_limits<double>::quiet_NaN());
  out += ',' + format_number(report.mean_forward_velocity);
  out += ',' + format_number(report.total_power);
  out += ',' + format_number(report.average_power);
  out += '\n';
  return out;
}

std::string energy_summary_text(const std::string& controller, const EnergyReport& report) {
  std::ostringstream out;
  out << "controller:            " << controller << '\n'
      << "steps:                 " << report.n_steps << '\n'
      << "joints:                " << report.n_joints << '\n';
  if (report.time_to_goal) {
    out << "time to goal:          " << format_number(*report.time_to_goal) << " s\n";
  } else {
    out << "time to goal:          not reached\n";
  }
  out << "mean forward velocity: " << format_number(report.mean_forward_velocity)
      << " m/s\n"
      << "total power:           " << format_number(report.total_power) << " W\n"
      << "average power:         " << format_number(report.average_power) << " W\n";
  return out.str();
}

std::string rewards_csv(const std::vector<EpisodeRecord>& episodes) {
  std::string out = "timestep,episode_return,episode_length\n";
  for (const EpisodeRecord& e : episodes) {
    out += std::to_string(e.timestep);
    out += ',' + format_number(e.episode_return);
    out += ',' + std::to_string(e.episode_length);
    out += '\n';
  }
  return out;
}

void write_text_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::filesystem::create_directories(p.parent_path());
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) {
    throw std::runtime_error("io: cannot open " + path + " for writing");
  }
  file << content;
  file.flush();
  if (!file) {
    throw std::runtime_error("io: write failed for " + path);
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) {
    throw std::runtime_error("io: cannot open " + path);
  }
  std::ostringstream buf;
  buf << file.rdbuf();
  return buf.str();
}

}  // namespace snake
