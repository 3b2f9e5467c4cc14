#include "resrag/http_server.hpp"

#include <httplib.h>
#include <json.hpp>

#include <iostream>

namespace resrag {

using nlohmann::json;
using nlohmann::ordered_json;

std::pair<int, std::string> error_response(std::exception const &e)
{
  ordered_json body;
  int status = 500;
  if (auto const *err = dynamic_cast<Error const *>(&e)) {
    auto const &kind = err->kind();
    body["error"] = kind;
    if (auto const *v = dynamic_cast<ValidationError const *>(&e)) {
      status = 422;
      body["key"] = v->key();
    } else if (kind == "InvalidConfig" || kind == "BudgetTooSmall" || kind == "SchemaError" ||
               kind == "DateRangeError") {
      status = 422;
    } else if (kind == "UnparsablePdfError" || kind == "EmptyDocumentError") {
      status = 400;
    } else if (kind == "ParseTimeoutError") {
      status = 504;
    } else if (kind == "NotFound") {
      status = 404;
    } else if (kind == "ProviderUnavailable" || kind == "ProviderTimeout" || kind == "ContextOverflow" ||
               kind == "PartialBatchError" || kind == "EmptyIndexError") {
      status = 503;
    }
  } else {
    body["error"] = "InternalError";
  }
  body["message"] = e.what();
  return {status, body.dump()};
}

namespace {

ordered_json meta_json(DocMeta const &m) { return ordered_json::parse(doc_meta_json(m)); }

template <typename T> std::optional<T> optional_number(json const &body, char const *key)
{
  auto it = body.find(key);
  if (it == body.end() || it->is_null()) { return std::nullopt; }
  if constexpr (std::is_integral_v<T>) {
    if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<std::int64_t>() >= 0)) {
      throw ValidationError(key, std::string(key) + " must be a non-negative integer");
    }
  } else {
    if (!it->is_number()) { throw ValidationError(key, std::string(key) + " must be a number"); }
  }
  return it->get<T>();
}

ChatRequest parse_chat(std::string const &text)
{
  json body;
  try {
    body = json::parse(text);
  } catch (json::parse_error const &e) {
    throw ValidationError("body", std::string("malformed JSON: ") + e.what());
  }
  if (!body.is_object()) { throw ValidationError("body", "request body must be an object"); }
  ChatRequest req;
  auto q = body.find("query");
  if (q == body.end() || !q->is_string()) { throw ValidationError("query", "query must be a string"); }
  req.query = q->get<std::string>();
  if (auto s = body.find("session_id"); s != body.end() && !s->is_null()) {
    if (!s->is_string()) { throw ValidationError("session_id", "session_id must be a string"); }
    req.session_id = s->get<std::string>();
  }
  req.n = optional_number<std::size_t>(body, "n");
  req.k = optional_number<std::size_t>(body, "k");
  req.alpha = optional_number<double>(body, "alpha");
  return req;
}

} // namespace

struct HttpServer::Impl
{
  QaService &service;
  ServerOptions options;
  httplib::Server server;

  Impl(QaService &s, ServerOptions o)
    : service(s)
    , options(o)
  {
    auto const threads = options.threads;
    server.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
    server.set_read_timeout(options.request_timeout);
    server.set_write_timeout(options.request_timeout);
    server.set_payload_max_length(options.max_upload_bytes);
    server.set_exception_handler([](httplib::Request const &, httplib::Response &res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (std::exception const &e) {
        auto [status, body] = error_response(e);
        res.status = status;
        res.set_content(body, "application/json");
      } catch (...) {
        res.status = 500;
        res.set_content(R"({"error":"InternalError","message":"unknown"})", "application/json");
      }
    });
    routes();
  }

  void routes()
  {
    server.Post("/api/chat", [this](httplib::Request const &req, httplib::Response &res) {
      auto const r = service.handle_chat(parse_chat(req.body));
      auto sources = ordered_json::array();
      for (auto const &s : r.sources) { sources.push_back(meta_json(s)); }
      ordered_json out{{"session_id", r.session_id},
                       {"answer", r.answer},
                       {"sources", sources},
                       {"timings", {{"retrieve_ms", r.retrieve_ms}, {"generate_ms", r.generate_ms}}}};
      res.set_content(out.dump(), "application/json");
    });

    server.Post("/api/upload", [this](httplib::Request const &req, httplib::Response &res) {
      if (!req.has_file("file")) { throw ValidationError("file", "multipart field 'file' is required"); }
      auto const file = req.get_file_value("file");
      std::optional<std::string> session;
      if (req.has_file("session_id")) {
        session = req.get_file_value("session_id").content;
      } else if (req.has_param("session_id")) {
        session = req.get_param_value("session_id");
      }
      auto const r = service.upload_pdf(session, as_bytes(file.content), file.filename.empty() ? "upload.pdf" : file.filename);
      ordered_json out{{"session_id", r.session_id}, {"upload_id", r.upload_id}, {"chunks", r.chunks}};
      res.set_content(out.dump(), "application/json");
    });

    server.Get(R"(/api/documents/(.+)/meta)", [this](httplib::Request const &req, httplib::Response &res) {
      res.set_content(doc_meta_json(service.document_meta(req.matches[1])), "application/json");
    });

    server.Get(R"(/api/documents/(.+))", [this](httplib::Request const &req, httplib::Response &res) {
      if (!req.has_param("lang")) { throw ValidationError("lang", "query parameter 'lang' is required"); }
      auto const doc = service.get_document(req.matches[1], req.get_param_value("lang"));
      res.set_header("Content-Disposition", "inline; filename=\"" + pdf_store_name(doc.meta.doc_id) + "_" +
                                              req.get_param_value("lang") + ".pdf\"");
      res.set_content(doc.bytes, "application/pdf");
    });

    server.Get(R"(/api/history/([0-9A-Za-z_-]+))", [this](httplib::Request const &req, httplib::Response &res) {
      std::string const format = req.has_param("format") ? req.get_param_value("format") : "json";
      std::string const id = req.matches[1];
      if (format == "json") {
        res.set_header("Content-Disposition", "attachment; filename=\"history-" + id + ".json\"");
        res.set_content(service.export_history(id, HistoryFormat::Json), "application/json");
      } else if (format == "markdown" || format == "md") {
        res.set_header("Content-Disposition", "attachment; filename=\"history-" + id + ".md\"");
        res.set_content(service.export_history(id, HistoryFormat::Markdown), "text/markdown; charset=utf-8");
      } else {
        throw ValidationError("format", "format must be json or markdown");
      }
    });

    server.Post("/api/eval", [this](httplib::Request const &req, httplib::Response &res) {
      auto const stored = service.record_eval(eval_record_from_json(req.body));
      res.set_content(ordered_json{{"status", "ok"}, {"timestamp", stored.timestamp}}.dump(), "application/json");
    });

    server.Get("/api/eval/report", [this](httplib::Request const &req, httplib::Response &res) {
      std::optional<std::string> config;
      if (req.has_param("config")) { config = req.get_param_value("config"); }
      res.set_content(report_json(service.eval_report(config)), "application/json");
    });

    server.Get("/healthz", [this](httplib::Request const &, httplib::Response &res) {
      auto const h = service.healthz();
      res.set_content(ordered_json{{"status", h.status}, {"index_docs", h.index_docs}, {"model_id", h.model_id}}.dump(),
                      "application/json");
    });
  }
};

HttpServer::HttpServer(QaService &service, ServerOptions options)
  : impl_(std::make_unique<Impl>(service, options))
{
}

HttpServer::~HttpServer() { stop(); }

bool HttpServer::listen(std::string const &host, int port) { return impl_->server.listen(host, port); }

int HttpServer::bind_any_port(std::string const &host) { return impl_->server.bind_to_any_port(host); }

bool HttpServer::run() { return impl_->server.listen_after_bind(); }

void HttpServer::stop()
{
  if (impl_) { impl_->server.stop(); }
}

bool HttpServer::running() const { return impl_->server.is_running(); }

} // namespace resrag
