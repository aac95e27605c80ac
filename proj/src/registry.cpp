#include "fedsim/registry.hpp"

#include <stdexcept>

namespace fedsim {

ComponentRegistry::ComponentRegistry() {
  register_dataset("blobs", [](const TaskConfig& config) {
    FederatedData data;
    auto [train, test] = generate_blobs(config.data.classes, config.data.samples_per_class,
                                        config.data.features, config.data.domains,
                                        config.data.seed);
    data.train = std::move(train);
    data.test = std::move(test);
    return data;
  });
  register_model("linear_softmax", [](const TaskConfig&, const Dataset& train) {
    return ModelSpec::linear(static_cast<int>(train.features.cols()), train.num_classes);
  });
  register_model("mlp", [](const TaskConfig& config, const Dataset& train) {
    return ModelSpec::mlp(static_cast<int>(train.features.cols()), config.model.hidden_layers,
                          train.num_classes);
  });
}

void ComponentRegistry::register_dataset(const std::string& name, DatasetFactory factory) {
  if (!datasets_.emplace(name, std::move(factory)).second) {
    throw std::invalid_argument("registry: dataset '" + name + "' already registered");
  }
}

void ComponentRegistry::register_model(const std::string& name, ModelFactory factory) {
  if (!models_.emplace(name, std::move(factory)).second) {
    throw std::invalid_argument("registry: model '" + name + "' already registered");
  }
}

void ComponentRegistry::register_client(const std::string& name, ClientComponent component) {
  if (!clients_.emplace(name, std::move(component)).second) {
    throw std::invalid_argument("registry: client '" + name + "' already registered");
  }
}

void ComponentRegistry::register_server(const std::string& name, ServerComponent component) {
  if (!servers_.emplace(name, std::move(component)).second) {
    throw std::invalid_argument("registry: server '" + name + "' already registered");
  }
}

FederatedData ComponentRegistry::make_dataset(const TaskConfig& config) const {
  auto it = datasets_.find(config.data.dataset);
  if (it == datasets_.end()) {
    throw std::invalid_argument("registry: unknown dataset '" + config.data.dataset + "'");
  }
  FederatedData data = it->second(config);
  data.train.validate();
  data.test.validate();
  return data;
}

ModelSpec ComponentRegistry::make_model(const TaskConfig& config, const Dataset& train) const {
  auto it = models_.find(config.model.name);
  if (it == models_.end()) {
    throw std::invalid_argument("registry: unknown model '" + config.model.name + "'");
  }
  ModelSpec spec = it->second(config, train);
  spec.validate();
  return spec;
}

const ClientComponent& ComponentRegistry::client_component(const std::string& name) const {
  auto it = clients_.find(name);
  if (it == clients_.end()) {
    throw std::invalid_argument("registry: unknown client component '" + name + "'");
  }
  return it->second;
}

const ServerComponent& ComponentRegistry::server_component(const std::string& name) const {
  auto it = servers_.find(name);
  if (it == servers_.end()) {
    throw std::invalid_argument("registry: unknown server component '" + name + "'");
  }
  return it->second;
}

bool ComponentRegistry::has_client_component(const std::string& name) const {
  return clients_.count(name) != 0;
}

}  // namespace fedsim
