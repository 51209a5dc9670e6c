#include "sentipipe/remote_backend.hpp"
#include "sentipipe/stub_backend.hpp"

namespace sentipipe {

std::unique_ptr<ModelBackend> make_backend(const PipelineConfig& config) {
    if (config.backend.kind == BackendKind::remote) {
        return std::make_unique<RemoteBackend>(config.backend, config.dimension);
    }
    return std::make_unique<StubBackend>(config);
}

}  // namespace sentipipe
