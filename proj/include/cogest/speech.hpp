#pragma once

#include "cogest/core.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cogest
{
    struct UtteranceEvent
    {
        std::string text;
        Seconds speech_start = 0.0;
        Seconds speech_end = 0.0;
        std::uint64_t id = 0; // trace seq of the (first) utterance record

        friend bool operator==(const UtteranceEvent&, const UtteranceEvent&) = default;
    };

    struct SpeechTranscript
    {
        std::string text;
        Seconds speech_end = 0.0;
        Seconds recognized_at = 0.0;
        std::uint64_t id = 0;

        friend bool operator==(const SpeechTranscript&, const SpeechTranscript&) = default;
    };

    struct SpeechChannelConfig
    {
        Seconds pause_filter = 0.5;
        Seconds latency_mean = 1.9;
        Seconds latency_jitter = 0.2; // uniform half-width
        std::uint64_t rng_seed = 0;

        void validate() const
        {
            if (!(pause_filter >= 0.0))
                throw Error(ErrorCode::InvalidConfig, "pause_filter must be >= 0");
            if (!(latency_jitter >= 0.0))
                throw Error(ErrorCode::InvalidConfig, "latency_jitter must be >= 0");
            if (!(latency_mean >= pause_filter))
                throw Error(ErrorCode::InvalidConfig, "latency_mean must be >= pause_filter");
            if (!(latency_mean - latency_jitter >= pause_filter))
                throw Error(ErrorCode::InvalidConfig, "latency_mean - latency_jitter must be >= pause_filter");
        }
    };

    // Merges utterances separated by less than the pause filter. Merged text is
    // space-joined; the earlier start and id are kept.
    inline std::vector<UtteranceEvent> segment(std::span<const UtteranceEvent> events, const SpeechChannelConfig& config)
    {
        std::vector<UtteranceEvent> out;
        for (std::size_t i = 0; i < events.size(); ++i)
        {
            const auto& ev = events[i];
            if (ev.speech_end < ev.speech_start)
                throw Error(ErrorCode::InvalidParams, "utterance ends before it starts");
            if (i > 0 && ev.speech_start < events[i - 1].speech_start)
                throw Error(ErrorCode::OutOfOrder, "utterance " + std::to_string(i) + " starts before its predecessor");
            if (!out.empty() && ev.speech_start - out.back().speech_end < config.pause_filter)
            {
                auto& cur = out.back();
                cur.text += ' ';
                cur.text += ev.text;
                cur.speech_end = std::max(cur.speech_end, ev.speech_end);
                continue;
            }
            out.push_back(ev);
        }
        return out;
    }

    // Streaming speech pipeline: segmentation by the pause filter followed by a
    // seeded recognition-latency draw. One consumer per instance.
    class SpeechChannel
    {
    public:
        explicit SpeechChannel(SpeechChannelConfig config) : config_(config), rng_(config.rng_seed)
        {
            config_.validate();
        }

        const SpeechChannelConfig& config() const noexcept { return config_; }

        SpeechTranscript recognize(const UtteranceEvent& utterance)
        {
            const double lo = config_.latency_mean - config_.latency_jitter;
            const double hi = config_.latency_mean + config_.latency_jitter;
            const double delay = config_.latency_jitter > 0.0 ? rng_.uniform(lo, hi) : config_.latency_mean;
            return {utterance.text, utterance.speech_end, utterance.speech_end + delay, utterance.id};
        }

        // Feeds one raw utterance. Returns the previously buffered utterance if
        // this one starts after a full pause.
        std::vector<UtteranceEvent> push(const UtteranceEvent& ev)
        {
            if (ev.speech_end < ev.speech_start)
                throw Error(ErrorCode::InvalidParams, "utterance ends before it starts");
            if (last_start_ && ev.speech_start < *last_start_)
                throw Error(ErrorCode::OutOfOrder, "utterance starts before its predecessor");
            last_start_ = ev.speech_start;

            std::vector<UtteranceEvent> done;
            if (pending_)
            {
                if (ev.speech_start - pending_->speech_end < config_.pause_filter)
                {
                    pending_->text += ' ';
                    pending_->text += ev.text;
                    pending_->speech_end = std::max(pending_->speech_end, ev.speech_end);
                    return done;
                }
                done.push_back(std::move(*pending_));
            }
            pending_ = ev;
            return done;
        }

        // Time at which the buffered utterance is known to be complete.
        std::optional<Seconds> deadline() const
        {
            if (!pending_)
                return std::nullopt;
            return pending_->speech_end + config_.pause_filter;
        }

        std::optional<UtteranceEvent> finalize_until(Seconds now)
        {
            if (pending_ && now >= pending_->speech_end + config_.pause_filter)
                return take_pending();
            return std::nullopt;
        }

        std::optional<UtteranceEvent> flush() { return take_pending(); }

    private:
        std::optional<UtteranceEvent> take_pending()
        {
            auto out = std::move(pending_);
            pending_.reset();
            return out;
        }

        SpeechChannelConfig config_;
        Rng rng_;
        std::optional<UtteranceEvent> pending_;
        std::optional<Seconds> last_start_;
    };
} // namespace cogest
