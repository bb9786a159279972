#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "memhub/hub.hpp"
#include "memhub/server.hpp"
#include "memhub/sim.hpp"
#include "memhub/text.hpp"

namespace py = pybind11;
using namespace memhub;

namespace {

// A hub plus an optional HTTP front end. Requests and responses cross the
// boundary as JSON text; the Python package parses them.
class PyHub {
 public:
  PyHub(const std::string& data_dir, std::optional<std::string> admin_token,
        std::size_t embedding_dim, const std::string& sync_mode) {
    HubConfig config;
    config.store.data_dir = data_dir;
    config.store.embedding_dim = embedding_dim;
    if (sync_mode == "per_batch") {
      config.store.sync_mode = SyncMode::kPerBatch;
    } else if (sync_mode != "per_append") {
      throw_invalid("sync_mode must be per_append or per_batch");
    }
    config.admin_token = std::move(admin_token);
    hub_ = std::make_unique<Hub>(std::move(config));
  }

  std::string request(const std::string& method, const std::string& path,
                      const std::string& body, std::optional<std::string> token,
                      const std::map<std::string, std::string>& params) {
    const Principal p = token ? hub_->authenticate(*token, operation_for(method, path))
                              : hub_->local_admin();
    const json parsed = body.empty() ? json(nullptr) : parse_json(body);
    const QueryParams qp(params.begin(), params.end());
    return hub_->dispatch(p, method, path, qp, parsed).dump();
  }

  int serve(const std::string& host, int port) {
    if (server_) throw_invalid("already serving");
    server_ = std::make_unique<HubServer>(*hub_);
    server_->start(host, port);
    return server_->port();
  }

  void stop() {
    if (server_) server_->stop();
    server_.reset();
  }

 private:
  std::unique_ptr<Hub> hub_;
  std::unique_ptr<HubServer> server_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "memhub core bindings";

  static py::exception<Error> hub_error(m, "HubError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      // args = (code, message)
      py::tuple args = py::make_tuple(std::string(error_code_name(e.code())),
                                      std::string(e.what()));
      PyErr_SetObject(hub_error.ptr(), args.ptr());
    }
  });

  py::class_<PyHub>(m, "Hub")
      .def(py::init<const std::string&, std::optional<std::string>, std::size_t,
                    const std::string&>(),
           py::arg("data_dir"), py::arg("admin_token") = py::none(),
           py::arg("embedding_dim") = 64, py::arg("sync_mode") = "per_append")
      .def("request", &PyHub::request, py::arg("method"), py::arg("path"),
           py::arg("body") = "", py::arg("token") = py::none(),
           py::arg("params") = std::map<std::string, std::string>{},
           py::call_guard<py::gil_scoped_release>())
      .def("serve", &PyHub::serve, py::arg("host") = "127.0.0.1",
           py::arg("port") = 0, py::call_guard<py::gil_scoped_release>())
      .def("stop", &PyHub::stop, py::call_guard<py::gil_scoped_release>());

  m.def("tokenize", &tokenize, py::arg("text"));
  m.def(
      "embed",
      [](const std::string& text, std::size_t dim) {
        return HashingEmbedder(dim).embed(text);
      },
      py::arg("text"), py::arg("dim") = 64);
  m.def("list_scenarios", &list_scenarios);
  m.def(
      "run_scenario",
      [](const std::string& name, const std::string& mode) {
        return to_json(run_scenario(name, sim_mode_from_name(mode))).dump();
      },
      py::arg("name"), py::arg("mode") = "hub",
      py::call_guard<py::gil_scoped_release>());
}
