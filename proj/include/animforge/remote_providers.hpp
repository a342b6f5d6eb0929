#pragma once

// JSON-over-HTTP adapters. They move bytes and map status codes; payload
// semantics belong to the service behind the endpoint.
//
// Wire schemas (all POST, JSON bodies, images as base64 PNG):
//   /chat            {messages:[{role,text,images:[..]}]}            -> {reply}
//   /images          {prompt,reference_images:[{data}|{url}],seed,n}  -> {images:[..]}
//   /images/replace  {image,mask,prompt,reference_images,seed}        -> {image}
//   /videos          {conditioning_image,prompt,params,seed,n,frame_count,fps}
//                                                                     -> {videos:[{fps,frames:[..]}]}
//   /segment         {image}                                          -> {masks:[{label,mask}]}
//   /embed/text      {text}                                           -> {embedding:[..]}
//   /embed/image     {images:[..]}                                    -> {embeddings:[[..]]}

#include <chrono>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "animforge/error.hpp"
#include "animforge/providers.hpp"

namespace animforge::remote {

struct HttpResponse {
    int status = 0;
    std::string body;
};

// Raised by transports when no response arrived (connection failure or timeout).
class TransportFailure : public Error {
public:
    using Error::Error;
};

class Transport {
public:
    virtual ~Transport() = default;
    virtual HttpResponse post(const std::string& path, const std::string& body,
                              const std::map<std::string, std::string>& headers, std::chrono::milliseconds timeout) = 0;
};

class HttpTransport : public Transport {
public:
    explicit HttpTransport(std::string endpoint);
    HttpResponse post(const std::string& path, const std::string& body,
                      const std::map<std::string, std::string>& headers, std::chrono::milliseconds timeout) override;

private:
    std::string endpoint_;
    std::string base_path_;
};

// In-process transport for tests: a handler decides every response.
class FakeTransport : public Transport {
public:
    struct Request {
        std::string path;
        std::string body;
        std::map<std::string, std::string> headers;
    };
    using Handler = std::function<HttpResponse(const Request&)>;

    explicit FakeTransport(Handler handler) : handler_(std::move(handler)) {}
    HttpResponse post(const std::string& path, const std::string& body,
                      const std::map<std::string, std::string>& headers, std::chrono::milliseconds timeout) override;
    std::vector<Request> requests() const;

private:
    Handler handler_;
    mutable std::mutex mu_;
    std::vector<Request> requests_;
};

using Clock = std::function<std::chrono::steady_clock::time_point()>;
using Sleeper = std::function<void(std::chrono::milliseconds)>;

Clock system_clock();
Sleeper system_sleeper();

// Sliding-window admission: at most `requests` admissions in any `window`.
class RateLimiter {
public:
    RateLimiter(int requests, std::chrono::milliseconds window, Clock clock, Sleeper sleeper);
    void acquire();

private:
    int requests_;
    std::chrono::milliseconds window_;
    Clock clock_;
    Sleeper sleeper_;
    std::mutex mu_;
    std::deque<std::chrono::steady_clock::time_point> admitted_;
};

// 5xx -> Transient, 429 -> RateLimited, other 4xx -> Permanent.
ProviderErrc classify_status(int status);

// Backoff before retry n (0-based): base * 2^n.
std::chrono::milliseconds backoff_delay(std::chrono::milliseconds base, int retry);

struct CallStats {
    int attempts = 0;
    std::vector<std::chrono::milliseconds> delays;
};

class RemoteClient {
public:
    RemoteClient(std::shared_ptr<Transport> transport, ProviderPolicy policy, std::string credential = {},
                 Clock clock = system_clock(), Sleeper sleeper = system_sleeper());

    // POSTs body to path with retries; returns the parsed JSON response.
    nlohmann::json call(const std::string& path, const nlohmann::json& body);
    CallStats last_call() const;

private:
    std::shared_ptr<Transport> transport_;
    ProviderPolicy policy_;
    std::string credential_;
    Sleeper sleeper_;
    RateLimiter limiter_;
    mutable std::mutex mu_;
    CallStats last_;
};

enum class ReferenceMode { Data, Url };

class RemoteChat : public ChatProvider {
public:
    explicit RemoteChat(std::shared_ptr<RemoteClient> client, int max_attachments = 16);
    std::string chat(const std::vector<ChatMessage>& messages) override;
    int max_attachments() const override { return max_attachments_; }

private:
    std::shared_ptr<RemoteClient> client_;
    int max_attachments_;
};

class RemoteImageProvider : public ImageProvider {
public:
    // In Url mode reference images are sent as url_prefix + content_hash + ".png"
    // and the deployment is expected to serve them there.
    explicit RemoteImageProvider(std::shared_ptr<RemoteClient> client, ReferenceMode mode = ReferenceMode::Data,
                                 std::string url_prefix = {});
    std::vector<Image> generate_images(const ImageRequest& request, int n) override;
    Image region_replace(const Image& image, const SegmentationMask& mask, const ImageRequest& request) override;

private:
    nlohmann::json references(const ImageRequest& request) const;
    std::shared_ptr<RemoteClient> client_;
    ReferenceMode mode_;
    std::string url_prefix_;
};

class RemoteVideoProvider : public VideoProvider {
public:
    explicit RemoteVideoProvider(std::shared_ptr<RemoteClient> client);
    std::vector<FrameSequence> generate_videos(const VideoRequest& request, int n) override;

private:
    std::shared_ptr<RemoteClient> client_;
};

class RemoteSegmenter : public Segmenter {
public:
    explicit RemoteSegmenter(std::shared_ptr<RemoteClient> client);
    std::vector<SegmentationMask> segment(const Image& image) override;

private:
    std::shared_ptr<RemoteClient> client_;
};

class RemoteEmbedder : public Embedder {
public:
    explicit RemoteEmbedder(std::shared_ptr<RemoteClient> client);
    EmbeddingVector embed_text(std::string_view text) override;
    EmbeddingVector embed_image(const Image& image) override;
    std::vector<EmbeddingVector> embed_images(std::span<const Image> images) override;

private:
    std::shared_ptr<RemoteClient> client_;
};

std::string encode_image(const Image& image);
Image decode_image(const std::string& b64);

}  // namespace animforge::remote
