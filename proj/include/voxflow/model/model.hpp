#pragma once

#include "voxflow/model/flow.hpp"
#include "voxflow/model/mas.hpp"
#include "voxflow/model/modules.hpp"
#include "voxflow/model/speaker.hpp"

namespace voxflow {

// The complete network. Parameters split into a generator partition
// (everything that synthesizes) and a discriminator partition.
template <class S>
struct TtsModel {
    ModelConfig cfg;
    PosteriorEncoder<S> posterior;
    Decoder<S> decoder;
    TextEncoder<S> text;
    DurationPredictor<S> duration;
    TimbreFlow<S> flow;
    SpeakerEncoder<S> speaker;
    LeakageDisc<S> disc_p;
    TimbreDisc<S> disc_t;

    void init(const ModelConfig& c, uint64_t seed) {
        cfg = c;
        cfg.validate();
        RandomStream rng(seed, 0xC0FFEE);
        posterior.init(cfg, rng);
        decoder.init(cfg, rng);
        text.init(cfg, rng);
        duration.init(cfg, rng);
        flow.init(cfg, rng);
        speaker.init(cfg, rng);
        disc_p.init(cfg, rng);
        disc_t.init(cfg, rng);
    }

    ParamRefs<S> generator_params() {
        ParamRefs<S> o;
        posterior.collect(o, "posterior");
        decoder.collect(o, "decoder");
        text.collect(o, "text");
        duration.collect(o, "duration");
        flow.collect(o, "flow");
        speaker.collect(o, "speaker");
        return o;
    }

    ParamRefs<S> discriminator_params() {
        ParamRefs<S> o;
        disc_p.collect(o, "disc_p");
        disc_t.collect(o, "disc_t");
        return o;
    }

    ParamRefs<S> params() {
        ParamRefs<S> o = generator_params();
        for (auto& pr : discriminator_params()) o.push_back(pr);
        return o;
    }
};

}  // namespace voxflow
