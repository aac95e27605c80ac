#include "fedsim/partition.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "fedsim/rng.hpp"

namespace fedsim {
namespace {

constexpr int kMaxRedraws = 100;

// Converts proportions to integer counts summing exactly to n.
std::vector<std::int64_t> largest_remainder(const std::vector<double>& proportions, std::int64_t n) {
  const std::size_t m = proportions.size();
  std::vector<std::int64_t> counts(m);
  std::vector<std::pair<double, std::size_t>> fractions(m);
  std::int64_t assigned = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double target = proportions[i] * static_cast<double>(n);
    counts[i] = static_cast<std::int64_t>(std::floor(target));
    fractions[i] = {target - std::floor(target), i};
    assigned += counts[i];
  }
  std::sort(fractions.begin(), fractions.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (std::int64_t r = 0; r < n - assigned; ++r) {
    ++counts[fractions[static_cast<std::size_t>(r) % m].second];
  }
  return counts;
}

// Grouping key for the dir split: label, or a named attribute's category.
std::vector<int> group_keys(const Dataset& d, const PartitionSpec& spec, int* num_groups) {
  if (spec.main_attribute.empty()) {
    *num_groups = d.num_classes;
    return d.labels;
  }
  const int attr = d.attribute_index(spec.main_attribute);
  if (attr < 0) {
    throw std::invalid_argument("partition: dataset has no attribute '" + spec.main_attribute + "'");
  }
  *num_groups = d.attribute_cardinality[attr];
  return d.attribute_values[attr];
}

Partition finish(const Dataset& d, const PartitionSpec& spec,
                 std::vector<std::vector<std::int64_t>> per_client, int repairs) {
  Partition partition;
  partition.spec = spec;
  partition.empty_client_repairs = repairs;

  std::vector<bool> seen(static_cast<std::size_t>(d.size()), false);
  for (int c = 0; c < spec.num_clients; ++c) {
    ClientPartition client;
    client.client_id = c;
    client.sample_indices = std::move(per_client[c]);
    std::sort(client.sample_indices.begin(), client.sample_indices.end());
    client.label_histogram.assign(d.num_classes, 0);
    client.attribute_histograms.resize(d.attribute_names.size());
    for (std::size_t a = 0; a < d.attribute_names.size(); ++a) {
      client.attribute_histograms[a].assign(d.attribute_cardinality[a], 0);
    }
    for (std::int64_t idx : client.sample_indices) {
      if (idx < 0 || idx >= d.size() || seen[static_cast<std::size_t>(idx)]) {
        throw std::logic_error("partition: index duplicated or out of range");
      }
      seen[static_cast<std::size_t>(idx)] = true;
      ++client.label_histogram[d.labels[static_cast<std::size_t>(idx)]];
      for (std::size_t a = 0; a < d.attribute_values.size(); ++a) {
        ++client.attribute_histograms[a][d.attribute_values[a][static_cast<std::size_t>(idx)]];
      }
    }
    partition.clients.push_back(std::move(client));
  }
  return partition;
}

// Moves one sample from the currently largest client into each empty one.
int repair_empty_clients(std::vector<std::vector<std::int64_t>>& per_client) {
  int repairs = 0;
  for (auto& client : per_client) {
    if (!client.empty()) continue;
    auto largest = std::max_element(
        per_client.begin(), per_client.end(),
        [](const auto& a, const auto& b) { return a.size() < b.size(); });
    if (largest->size() <= 1) {
      throw std::runtime_error("partition: cannot repair empty client, not enough samples");
    }
    client.push_back(largest->back());
    largest->pop_back();
    ++repairs;
  }
  return repairs;
}

bool any_empty(const std::vector<std::vector<std::int64_t>>& per_client) {
  return std::any_of(per_client.begin(), per_client.end(),
                     [](const auto& c) { return c.empty(); });
}

}  // namespace

Partition partition_iid(const Dataset& d, const PartitionSpec& spec) {
  const std::int64_t n = d.size();
  const int m = spec.num_clients;
  if (m > n) throw std::invalid_argument("partition_iid: more clients than samples");

  Rng rng(derive_seed(spec.seed, 0x696964ULL));
  const auto perm = rng.permutation(n);

  const std::int64_t base = n / m;
  const std::int64_t remainder = n % m;
  std::vector<std::vector<std::int64_t>> per_client(m);
  std::int64_t cursor = 0;
  for (int c = 0; c < m; ++c) {
    const std::int64_t take = base + (c < remainder ? 1 : 0);
    per_client[c].assign(perm.begin() + cursor, perm.begin() + cursor + take);
    cursor += take;
  }
  return finish(d, spec, std::move(per_client), 0);
}

Partition partition_dirichlet(const Dataset& d, const PartitionSpec& spec) {
  const int m = spec.num_clients;
  if (d.size() < m) throw std::invalid_argument("partition_dirichlet: more clients than samples");

  int num_groups = 0;
  const std::vector<int> keys = group_keys(d, spec, &num_groups);

  Rng rng(derive_seed(spec.seed, 0x646972ULL));
  std::vector<std::vector<std::int64_t>> groups(num_groups);
  for (std::int64_t i = 0; i < d.size(); ++i) groups[keys[static_cast<std::size_t>(i)]].push_back(i);
  for (auto& group : groups) rng.shuffle(group);

  std::vector<std::vector<std::int64_t>> per_client;
  int repairs = 0;
  for (int attempt = 0;; ++attempt) {
    per_client.assign(m, {});
    for (const auto& group : groups) {
      if (group.empty()) continue;
      const auto proportions = rng.dirichlet_symmetric(spec.alpha, m);
      const auto counts = largest_remainder(proportions, static_cast<std::int64_t>(group.size()));
      std::size_t cursor = 0;
      for (int c = 0; c < m; ++c) {
        for (std::int64_t k = 0; k < counts[c]; ++k) per_client[c].push_back(group[cursor++]);
      }
    }
    if (!any_empty(per_client)) break;
    if (attempt + 1 >= kMaxRedraws) {
      repairs = repair_empty_clients(per_client);
      break;
    }
  }
  return finish(d, spec, std::move(per_client), repairs);
}

Partition partition_shard(const Dataset& d, const PartitionSpec& spec) {
  const std::int64_t n = d.size();
  const int m = spec.num_clients;
  const std::int64_t total_shards = static_cast<std::int64_t>(m) * spec.shards_per_client;
  if (n % total_shards != 0) {
    throw std::invalid_argument("partition_shard: sample count not divisible into " +
                                std::to_string(total_shards) + " equal shards");
  }
  const std::int64_t shard_size = n / total_shards;

  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), std::int64_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
    return d.labels[static_cast<std::size_t>(a)] < d.labels[static_cast<std::size_t>(b)];
  });

  Rng rng(derive_seed(spec.seed, 0x736864ULL));
  auto shard_order = rng.permutation(total_shards);

  std::vector<std::vector<std::int64_t>> per_client(m);
  for (int c = 0; c < m; ++c) {
    for (int s = 0; s < spec.shards_per_client; ++s) {
      const std::int64_t shard = shard_order[static_cast<std::size_t>(c) * spec.shards_per_client + s];
      const auto begin = order.begin() + shard * shard_size;
      per_client[c].insert(per_client[c].end(), begin, begin + shard_size);
    }
  }
  return finish(d, spec, std::move(per_client), 0);
}

Partition partition_hdir(const Dataset& d, const PartitionSpec& spec) {
  if (d.attribute_count() < 3) {
    throw std::invalid_argument("partition_hdir: dataset needs at least three attributes");
  }
  const int m = spec.num_clients;
  if (d.size() < m) throw std::invalid_argument("partition_hdir: more clients than samples");

  const int main_attr = spec.main_attribute.empty() ? 0 : d.attribute_index(spec.main_attribute);
  if (main_attr < 0) {
    throw std::invalid_argument("partition_hdir: dataset has no attribute '" + spec.main_attribute + "'");
  }
  std::vector<int> rest;
  for (int a = 0; a < d.attribute_count() && rest.size() < 2; ++a) {
    if (a != main_attr) rest.push_back(a);
  }
  const int main_card = d.attribute_cardinality[main_attr];
  const int joint_card = d.attribute_cardinality[rest[0]] * d.attribute_cardinality[rest[1]];
  auto joint_of = [&](std::int64_t i) {
    return d.attribute_values[rest[0]][static_cast<std::size_t>(i)] * d.attribute_cardinality[rest[1]] +
           d.attribute_values[rest[1]][static_cast<std::size_t>(i)];
  };

  // Concentration per joint category proportional to its global prior,
  // normalized so the mean concentration equals alpha.
  std::vector<double> joint_counts(joint_card, 0.0);
  for (std::int64_t i = 0; i < d.size(); ++i) joint_counts[joint_of(i)] += 1.0;
  std::vector<double> concentration(joint_card);
  for (int k = 0; k < joint_card; ++k) {
    concentration[k] = spec.alpha * joint_counts[k] * static_cast<double>(joint_card) /
                       static_cast<double>(d.size());
  }

  Rng rng(derive_seed(spec.seed, 0x686472ULL));
  // pools[v][k]: shuffled sample indices of main-category v and joint key k.
  std::vector<std::vector<std::vector<std::int64_t>>> pools(
      main_card, std::vector<std::vector<std::int64_t>>(joint_card));
  std::vector<std::int64_t> main_totals(main_card, 0);
  {
    auto perm = rng.permutation(d.size());
    for (std::int64_t p : perm) {
      const int v = d.attribute_values[main_attr][static_cast<std::size_t>(p)];
      pools[v][joint_of(p)].push_back(p);
      ++main_totals[v];
    }
  }

  std::vector<std::vector<std::int64_t>> per_client;
  int repairs = 0;
  for (int attempt = 0;; ++attempt) {
    per_client.assign(m, {});
    std::vector<std::vector<std::size_t>> taken(main_card, std::vector<std::size_t>(joint_card, 0));

    for (int v = 0; v < main_card; ++v) {
      if (main_totals[v] == 0) continue;
      const auto stage1 = rng.dirichlet_symmetric(spec.alpha, m);
      const auto client_quota = largest_remainder(stage1, main_totals[v]);

      // requests[c][k], clamped later against pool availability.
      std::vector<std::vector<std::int64_t>> requests(m);
      for (int c = 0; c < m; ++c) {
        const auto stage2 = rng.dirichlet(concentration);
        requests[c] = largest_remainder(stage2, client_quota[c]);
      }

      for (int k = 0; k < joint_card; ++k) {
        const auto& pool = pools[v][k];
        std::size_t cursor = 0;
        for (int c = 0; c < m; ++c) {
          const std::size_t want = static_cast<std::size_t>(requests[c][k]);
          const std::size_t grant = std::min(want, pool.size() - cursor);
          for (std::size_t i = 0; i < grant; ++i) per_client[c].push_back(pool[cursor++]);
        }
        // Conservation: deal any leftover of this attribute triplet back
        // round-robin so no sample goes unassigned.
        int c = 0;
        while (cursor < pool.size()) {
          per_client[c % m].push_back(pool[cursor++]);
          ++c;
        }
      }
    }
    if (!any_empty(per_client)) break;
    if (attempt + 1 >= kMaxRedraws) {
      repairs = repair_empty_clients(per_client);
      break;
    }
  }
  return finish(d, spec, std::move(per_client), repairs);
}

Partition make_partition(const Dataset& d, const PartitionSpec& spec) {
  switch (spec.split_type) {
    case SplitType::iid: return partition_iid(d, spec);
    case SplitType::dir: return partition_dirichlet(d, spec);
    case SplitType::shard: return partition_shard(d, spec);
    case SplitType::hdir: return partition_hdir(d, spec);
  }
  throw std::logic_error("make_partition: unreachable");
}

std::string render_partition(const Partition& partition) {
  std::ostringstream os;
  std::int64_t total = 0;
  for (const auto& client : partition.clients) total += static_cast<std::int64_t>(client.sample_indices.size());

  os << "split_type = " << to_string(partition.spec.split_type) << "\n";
  os << "num_clients = " << partition.spec.num_clients << "\n";
  os << "alpha = " << partition.spec.alpha << "\n";
  os << "shards_per_client = " << partition.spec.shards_per_client << "\n";
  os << "main_attribute = " << partition.spec.main_attribute << "\n";
  os << "seed = " << partition.spec.seed << "\n";
  os << "empty_client_repairs = " << partition.empty_client_repairs << "\n";
  os << "total_samples = " << total << "\n";
  for (const auto& client : partition.clients) {
    os << "\nclient " << client.client_id << " count " << client.sample_indices.size() << "\n";
    os << "indices";
    for (std::int64_t idx : client.sample_indices) os << ' ' << idx;
    os << "\nlabel_histogram";
    for (std::int64_t count : client.label_histogram) os << ' ' << count;
    os << "\n";
    for (std::size_t a = 0; a < client.attribute_histograms.size(); ++a) {
      os << "attribute_histogram " << a;
      for (std::int64_t count : client.attribute_histograms[a]) os << ' ' << count;
      os << "\n";
    }
  }
  return os.str();
}

void save_partition(const std::string& path, const Partition& partition) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open mapping file for writing: " + path);
  out << render_partition(partition);
  if (!out) throw std::runtime_error("mapping write failed: " + path);
}

}  // namespace fedsim
