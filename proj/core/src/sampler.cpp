#include "glamor/sampler.hpp"

#include <algorithm>
#include <map>
#include <string>

#include "glamor/errors.hpp"
#include "glamor/random.hpp"

namespace glamor {

void PKSamplerConfig::validate() const {
  if (identities_per_batch < 2) throw ConfigError("PK sampler needs P >= 2 identities per batch");
  if (instances_per_identity < 2) throw ConfigError("PK sampler needs K >= 2 instances per identity");
}

std::vector<SampleBatch> pk_sample(std::span<const std::int64_t> sample_identities,
                                   const PKSamplerConfig& config, std::size_t epoch) {
  config.validate();
  std::map<std::int64_t, std::vector<std::size_t>> by_identity;
  for (std::size_t i = 0; i < sample_identities.size(); ++i) by_identity[sample_identities[i]].push_back(i);

  const std::size_t p = config.identities_per_batch;
  const std::size_t k = config.instances_per_identity;
  if (by_identity.size() < p) {
    throw ConfigError("dataset has " + std::to_string(by_identity.size()) +
                      " identities, fewer than P = " + std::to_string(p));
  }

  std::vector<const std::vector<std::size_t>*> groups;
  groups.reserve(by_identity.size());
  for (const auto& [id, members] : by_identity) groups.push_back(&members);

  Rng rng(config.seed, epoch);
  std::vector<std::size_t> order(groups.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(std::span<std::size_t>(order));

  std::vector<SampleBatch> batches;
  for (std::size_t start = 0; start < order.size(); start += p) {
    std::vector<std::size_t> chosen(order.begin() + static_cast<std::ptrdiff_t>(start),
                                    order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + p)));
    if (chosen.size() < p) {
      std::vector<std::size_t> rest;
      for (std::size_t g : order) {
        if (std::find(chosen.begin(), chosen.end(), g) == chosen.end()) rest.push_back(g);
      }
      rng.shuffle(std::span<std::size_t>(rest));
      chosen.insert(chosen.end(), rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(p - chosen.size()));
    }

    SampleBatch batch;
    batch.reserve(p * k);
    for (std::size_t g : chosen) {
      std::vector<std::size_t> members = *groups[g];
      rng.shuffle(std::span<std::size_t>(members));
      if (members.size() >= k) {
        batch.insert(batch.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(k));
      } else {
        batch.insert(batch.end(), members.begin(), members.end());
        for (std::size_t extra = members.size(); extra < k; ++extra) {
          batch.push_back(members[rng.uniform_index(members.size())]);
        }
      }
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

}  // namespace glamor
