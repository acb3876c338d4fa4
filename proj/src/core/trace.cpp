#include "core/trace.hpp"

#include <cstdio>

#include "core/textio.hpp"

namespace cansim {

void CountingSink::on_bit(uint64_t, BusLevel resolved, bool flip_attempted,
                          bool flip_succeeded, const int8_t*, size_t) {
    bits += 1;
    if (flip_attempted) flips_attempted += 1;
    if (flip_succeeded) flips_succeeded += 1;
    scanner.feed(resolved);
}

void CountingSink::annotate(const Annotation& a) {
    switch (a.kind) {
        case AnnKind::error:
            errors_total += 1;
            if (a.role == ErrorRole::receiver) receiver_errors += 1;
            break;
        case AnnKind::delivery: deliveries += 1; break;
        case AnnKind::alert: alerts += 1; break;
        case AnnKind::frame_ok: frames_ok += 1; break;
        default: break;
    }
}

void RecordingSink::on_bit(uint64_t bit, BusLevel resolved, bool flip_attempted,
                           bool flip_succeeded, const int8_t* driven, size_t n) {
    totals.on_bit(bit, resolved, flip_attempted, flip_succeeded, driven, n);
    TraceEvent ev;
    ev.bit = bit;
    ev.resolved = resolved;
    ev.flip_attempted = flip_attempted;
    ev.flip_succeeded = flip_succeeded;
    ev.driven.assign(driven, driven + n);
    events.push_back(std::move(ev));
}

void RecordingSink::annotate(const Annotation& a) {
    totals.annotate(a);
    if (!events.empty()) events.back().anns.push_back(a);
}

namespace {

const char* ann_kind_name(AnnKind k) {
    switch (k) {
        case AnnKind::error: return "error";
        case AnnKind::frame_start: return "frame_start";
        case AnnKind::frame_ok: return "frame_ok";
        case AnnKind::delivery: return "delivery";
        case AnnKind::mode_change: return "mode_change";
        case AnnKind::alert: return "alert";
        case AnnKind::attack: return "attack";
        case AnnKind::probe: return "probe";
    }
    return "?";
}

void write_ann(FILE* f, const Annotation& a) {
    fprintf(f, "{\"type\":\"%s\"", ann_kind_name(a.kind));
    if (a.node >= 0) fprintf(f, ",\"node\":%d", a.node);
    switch (a.kind) {
        case AnnKind::error:
            fprintf(f, ",\"kind\":\"%s\",\"role\":\"%s\"", error_kind_name(a.error),
                    a.role == ErrorRole::transmitter ? "transmitter" : "receiver");
            break;
        case AnnKind::frame_start:
        case AnnKind::frame_ok:
        case AnnKind::delivery:
        case AnnKind::probe:
            fprintf(f, ",\"id\":\"%s\"", format_id(a.id, true).c_str());
            break;
        case AnnKind::mode_change:
            fprintf(f, ",\"mode\":\"%s\"", ecu_mode_name(a.mode));
            break;
        case AnnKind::alert:
        case AnnKind::attack:
            if (a.label) fprintf(f, ",\"label\":\"%s\"", a.label);
            break;
    }
    fputc('}', f);
}

}  // namespace

bool write_trace_jsonl(const std::string& path, const std::vector<TraceEvent>& events,
                       const std::vector<std::string>& node_names) {
    FILE* f = fopen(path.c_str(), "w");
    if (!f) return false;
    fprintf(f, "{\"nodes\":[");
    for (size_t i = 0; i < node_names.size(); ++i)
        fprintf(f, "%s\"%s\"", i ? "," : "", node_names[i].c_str());
    fprintf(f, "]}\n");
    for (const TraceEvent& ev : events) {
        fprintf(f, "{\"bit\":%llu,\"resolved\":%d", (unsigned long long)ev.bit,
                level_bit(ev.resolved));
        if (ev.flip_attempted)
            fprintf(f, ",\"flip\":{\"attempted\":true,\"succeeded\":%s}",
                    ev.flip_succeeded ? "true" : "false");
        fprintf(f, ",\"driven\":[");
        for (size_t i = 0; i < ev.driven.size(); ++i)
            fprintf(f, "%s%d", i ? "," : "", (int)ev.driven[i]);
        fputc(']', f);
        if (!ev.anns.empty()) {
            fprintf(f, ",\"events\":[");
            for (size_t i = 0; i < ev.anns.size(); ++i) {
                if (i) fputc(',', f);
                write_ann(f, ev.anns[i]);
            }
            fputc(']', f);
        }
        fputs("}\n", f);
    }
    fclose(f);
    return true;
}

bool write_trace_csv(const std::string& path, const std::vector<TraceEvent>& events) {
    FILE* f = fopen(path.c_str(), "w");
    if (!f) return false;
    fputs("bit,resolved,errors_cum\n", f);
    uint64_t errs = 0;
    for (const TraceEvent& ev : events) {
        for (const Annotation& a : ev.anns)
            if (a.kind == AnnKind::error) errs += 1;
        fprintf(f, "%llu,%d,%llu\n", (unsigned long long)ev.bit, level_bit(ev.resolved),
                (unsigned long long)errs);
    }
    fclose(f);
    return true;
}

}  // namespace cansim
