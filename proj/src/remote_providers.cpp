#include "animforge/remote_providers.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <httplib.h>

#include "animforge/digest.hpp"
#include "animforge/png_io.hpp"

namespace animforge::remote {

namespace {

using nlohmann::json;

[[noreturn]] void bad_payload(const std::string& what) {
    throw ProviderError(ProviderErrc::Permanent, "malformed provider response: " + what);
}

const json& field(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) bad_payload(std::string("missing '") + key + "'");
    return j.at(key);
}

EmbeddingVector to_embedding(const json& j) {
    if (!j.is_array() || j.empty()) bad_payload("embedding must be a non-empty array");
    EmbeddingVector v;
    for (const auto& x : j) {
        if (!x.is_number()) bad_payload("embedding values must be numbers");
        const double d = x.get<double>();
        if (!std::isfinite(d)) bad_payload("embedding values must be finite");
        v.values.push_back(d);
    }
    return v;
}

}  // namespace

std::string encode_image(const Image& image) { return base64_encode(std::span<const std::uint8_t>(png::encode(image))); }

Image decode_image(const std::string& b64) {
    const auto bytes = base64_decode(b64);
    try {
        return png::decode(bytes);
    } catch (const std::exception& e) {
        bad_payload(std::string("image does not decode: ") + e.what());
    }
}

// ---------------------------------------------------------------------------

HttpTransport::HttpTransport(std::string endpoint) : endpoint_(std::move(endpoint)) {
    // Split "scheme://host:port/prefix" into client base and path prefix.
    const auto scheme = endpoint_.find("://");
    const auto slash = endpoint_.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (slash != std::string::npos) {
        base_path_ = endpoint_.substr(slash);
        endpoint_.resize(slash);
        while (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();
    }
}

HttpResponse HttpTransport::post(const std::string& path, const std::string& body,
                                 const std::map<std::string, std::string>& headers,
                                 std::chrono::milliseconds timeout) {
    httplib::Client cli(endpoint_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    cli.set_connection_timeout(secs.count(), usecs.count());
    cli.set_read_timeout(secs.count(), usecs.count());
    cli.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = cli.Post(base_path_ + path, h, body, "application/json");
    if (!res) throw TransportFailure("request to " + endpoint_ + path + " failed: " + httplib::to_string(res.error()));
    return {res->status, res->body};
}

HttpResponse FakeTransport::post(const std::string& path, const std::string& body,
                                 const std::map<std::string, std::string>& headers, std::chrono::milliseconds) {
    Request req{path, body, headers};
    {
        std::lock_guard lock(mu_);
        requests_.push_back(req);
    }
    return handler_(req);
}

std::vector<FakeTransport::Request> FakeTransport::requests() const {
    std::lock_guard lock(mu_);
    return requests_;
}

Clock system_clock() {
    return [] { return std::chrono::steady_clock::now(); };
}

Sleeper system_sleeper() {
    return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

// ---------------------------------------------------------------------------

RateLimiter::RateLimiter(int requests, std::chrono::milliseconds window, Clock clock, Sleeper sleeper)
    : requests_(requests), window_(window), clock_(std::move(clock)), sleeper_(std::move(sleeper)) {
    if (requests_ < 1 || window_.count() <= 0) throw std::invalid_argument("RateLimiter: invalid limit");
}

void RateLimiter::acquire() {
    std::lock_guard lock(mu_);
    for (;;) {
        const auto now = clock_();
        while (!admitted_.empty() && now - admitted_.front() >= window_) admitted_.pop_front();
        if (static_cast<int>(admitted_.size()) < requests_) {
            admitted_.push_back(now);
            return;
        }
        const auto wait = std::chrono::duration_cast<std::chrono::milliseconds>(admitted_.front() + window_ - now);
        sleeper_(std::max(wait, std::chrono::milliseconds(1)));
    }
}

ProviderErrc classify_status(int status) {
    if (status == 429) return ProviderErrc::RateLimited;
    if (status >= 500) return ProviderErrc::Transient;
    return ProviderErrc::Permanent;
}

std::chrono::milliseconds backoff_delay(std::chrono::milliseconds base, int retry) {
    const int shift = std::clamp(retry, 0, 20);
    return base * (1LL << shift);
}

RemoteClient::RemoteClient(std::shared_ptr<Transport> transport, ProviderPolicy policy, std::string credential,
                           Clock clock, Sleeper sleeper)
    : transport_(std::move(transport)),
      policy_(policy),
      credential_(std::move(credential)),
      sleeper_(sleeper),
      limiter_((policy.validate(), policy.rate_limit_requests), policy.rate_limit_window, std::move(clock),
               std::move(sleeper)) {}

json RemoteClient::call(const std::string& path, const json& body) {
    std::map<std::string, std::string> headers = {{"Accept", "application/json"}};
    if (!credential_.empty()) headers["Authorization"] = "Bearer " + credential_;
    const std::string payload = body.dump();

    CallStats stats;
    auto finish = [&] {
        std::lock_guard lock(mu_);
        last_ = stats;
    };
    for (int attempt = 0;; ++attempt) {
        limiter_.acquire();
        ++stats.attempts;
        ProviderErrc code;
        std::string reason;
        try {
            const HttpResponse res = transport_->post(path, payload, headers, policy_.timeout);
            if (res.status >= 200 && res.status < 300) {
                finish();
                json parsed = json::parse(res.body, nullptr, false);
                if (parsed.is_discarded()) bad_payload("body is not JSON");
                return parsed;
            }
            code = classify_status(res.status);
            reason = "HTTP " + std::to_string(res.status) + " from " + path;
        } catch (const TransportFailure& e) {
            code = ProviderErrc::Transient;
            reason = e.what();
        }
        if (code == ProviderErrc::Permanent || attempt >= policy_.max_retries) {
            finish();
            throw ProviderError(code, reason + " after " + std::to_string(stats.attempts) + " attempt(s)");
        }
        const auto delay = backoff_delay(policy_.backoff_base, attempt);
        stats.delays.push_back(delay);
        sleeper_(delay);
    }
}

CallStats RemoteClient::last_call() const {
    std::lock_guard lock(mu_);
    return last_;
}

// ---------------------------------------------------------------------------

RemoteChat::RemoteChat(std::shared_ptr<RemoteClient> client, int max_attachments)
    : client_(std::move(client)), max_attachments_(max_attachments) {}

std::string RemoteChat::chat(const std::vector<ChatMessage>& messages) {
    if (messages.empty()) throw ProviderError(ProviderErrc::Permanent, "chat: no messages");
    json msgs = json::array();
    for (const auto& m : messages) {
        if (static_cast<int>(m.attachments.size()) > max_attachments_)
            throw ProviderError(ProviderErrc::Permanent, "chat: too many attachments");
        json images = json::array();
        for (const auto& img : m.attachments) images.push_back(encode_image(img));
        msgs.push_back({{"role", m.role}, {"text", m.text}, {"images", images}});
    }
    const json res = client_->call("/chat", {{"messages", msgs}});
    const json& reply = field(res, "reply");
    if (!reply.is_string() || reply.get<std::string>().empty()) bad_payload("reply must be a non-empty string");
    return reply.get<std::string>();
}

RemoteImageProvider::RemoteImageProvider(std::shared_ptr<RemoteClient> client, ReferenceMode mode,
                                         std::string url_prefix)
    : client_(std::move(client)), mode_(mode), url_prefix_(std::move(url_prefix)) {}

json RemoteImageProvider::references(const ImageRequest& request) const {
    json refs = json::array();
    for (const auto& img : request.reference_images) {
        if (mode_ == ReferenceMode::Url) refs.push_back({{"url", url_prefix_ + img.content_hash() + ".png"}});
        else refs.push_back({{"data", encode_image(img)}});
    }
    return refs;
}

std::vector<Image> RemoteImageProvider::generate_images(const ImageRequest& request, int n) {
    request.validate();
    const json res = client_->call("/images", {{"prompt", request.prompt},
                                               {"reference_images", references(request)},
                                               {"seed", request.seed},
                                               {"n", n}});
    const json& images = field(res, "images");
    if (!images.is_array() || static_cast<int>(images.size()) != n) bad_payload("expected " + std::to_string(n) + " images");
    std::vector<Image> out;
    for (const auto& b64 : images) {
        if (!b64.is_string()) bad_payload("image entries must be strings");
        out.push_back(decode_image(b64.get<std::string>()));
    }
    return out;
}

Image RemoteImageProvider::region_replace(const Image& image, const SegmentationMask& mask,
                                          const ImageRequest& request) {
    request.validate();
    if (mask.width != image.width() || mask.height != image.height())
        throw ProviderError(ProviderErrc::Permanent, "region_replace: mask does not match the image size");
    const json res = client_->call(
        "/images/replace", {{"image", encode_image(image)},
                            {"mask", base64_encode(std::span<const std::uint8_t>(png::encode_mask(mask)))},
                            {"prompt", request.prompt},
                            {"reference_images", references(request)},
                            {"seed", request.seed}});
    const json& b64 = field(res, "image");
    if (!b64.is_string()) bad_payload("image must be a string");
    Image out = decode_image(b64.get<std::string>());
    if (out.width() != image.width() || out.height() != image.height()) bad_payload("replaced image changed size");
    return out;
}

RemoteVideoProvider::RemoteVideoProvider(std::shared_ptr<RemoteClient> client) : client_(std::move(client)) {}

std::vector<FrameSequence> RemoteVideoProvider::generate_videos(const VideoRequest& request, int n) {
    request.validate();
    const json res = client_->call("/videos", {{"conditioning_image", encode_image(request.conditioning_image)},
                                               {"prompt", request.prompt},
                                               {"params", prompt::to_json(request.params)},
                                               {"seed", request.seed},
                                               {"n", n},
                                               {"frame_count", request.frame_count},
                                               {"fps", request.fps}});
    const json& videos = field(res, "videos");
    if (!videos.is_array() || static_cast<int>(videos.size()) != n) bad_payload("expected " + std::to_string(n) + " videos");
    std::vector<FrameSequence> out;
    for (const auto& v : videos) {
        FrameSequence clip;
        const json& fps = field(v, "fps");
        if (!fps.is_number()) bad_payload("fps must be a number");
        clip.fps = fps.get<double>();
        for (const auto& f : field(v, "frames")) {
            if (!f.is_string()) bad_payload("frames must be strings");
            clip.frames.push_back(decode_image(f.get<std::string>()));
        }
        try {
            clip.validate();
        } catch (const std::invalid_argument& e) {
            bad_payload(e.what());
        }
        out.push_back(std::move(clip));
    }
    return out;
}

RemoteSegmenter::RemoteSegmenter(std::shared_ptr<RemoteClient> client) : client_(std::move(client)) {}

std::vector<SegmentationMask> RemoteSegmenter::segment(const Image& image) {
    const json res = client_->call("/segment", {{"image", encode_image(image)}});
    std::vector<SegmentationMask> out;
    for (const auto& m : field(res, "masks")) {
        const json& label = field(m, "label");
        const json& data = field(m, "mask");
        if (!label.is_string() || !data.is_string()) bad_payload("mask entries need string label and mask");
        try {
            out.push_back(png::decode_mask(base64_decode(data.get<std::string>()), label.get<std::string>()));
        } catch (const ProviderError&) {
            throw;
        } catch (const std::exception& e) {
            bad_payload(std::string("mask does not decode: ") + e.what());
        }
    }
    validate_partition(out, image.width(), image.height());
    return out;
}

RemoteEmbedder::RemoteEmbedder(std::shared_ptr<RemoteClient> client) : client_(std::move(client)) {}

EmbeddingVector RemoteEmbedder::embed_text(std::string_view text) {
    if (text.empty()) throw ProviderError(ProviderErrc::Permanent, "embed_text: empty text");
    return to_embedding(field(client_->call("/embed/text", {{"text", std::string(text)}}), "embedding"));
}

EmbeddingVector RemoteEmbedder::embed_image(const Image& image) {
    const Image one[1] = {image};
    return embed_images(one).front();
}

std::vector<EmbeddingVector> RemoteEmbedder::embed_images(std::span<const Image> images) {
    json arr = json::array();
    for (const auto& img : images) arr.push_back(encode_image(img));
    const json& list = field(client_->call("/embed/image", {{"images", arr}}), "embeddings");
    if (!list.is_array() || list.size() != images.size()) bad_payload("embedding count does not match the batch");
    std::vector<EmbeddingVector> out;
    for (const auto& e : list) out.push_back(to_embedding(e));
    for (const auto& e : out)
        if (e.dimension() != out.front().dimension()) bad_payload("embedding dimensions differ within a batch");
    return out;
}

}  // namespace animforge::remote
