#pragma once

#include <string>
#include <vector>

#include "snake/metrics.hpp"
#include "snake/trainer.hpp"

namespace snake {

// Per-step trajectory document: step,time_s,head_x,head_y,centroid_x,
// centroid_y,reward,done, then angle_*, rate_*, torque_* joint blocks.
std::string trace_csv(const RolloutTrace& trace);

std::string energy_csv_header();
std::string energy_csv_row(const std::string& controller, const EnergyReport& report);
std::string energy_summary_text(const std::string& controller, const EnergyReport& report);

// timestep,episode_return,episode_length — one row per finished episode.
std::string rewards_csv(const std::vector<EpisodeRecord>& episodes);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace snake
