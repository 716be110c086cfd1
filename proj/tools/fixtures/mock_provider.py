#!/usr/bin/env python3
"""Deterministic stand-in for an OpenAI-compatible model endpoint.

Serves POST /v1/chat/completions and POST /v1/embeddings. Chat requests are
routed on the "[refine:<stage>@v<n>]" tag that starts every system message.
Paper stages answer from the corpus ground truth; the rest build plausible
text from the request payload. Used once to record the committed fixtures.

    python3 tools/fixtures/mock_provider.py --port 8765 \
        --truth tests/data/corpus/ground_truth.json
"""

import argparse
import hashlib
import json
import math
import re
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

EMBED_DIM = 64
STOPWORDS = set("""a an and are as at be by for from has have in into is it its of on or so
that the their them these this to was were with without your you our we they than then
each every more most less not""".split())

MOCKUP_CONTEXT = {
    "target_user": "frequent business travelers",
    "domain": "flight search and booking",
    "modality": "mobile app",
    "pain_point": "comparing fares across many results and hidden fees at checkout",
    "client": "Not specified",
    "metric": "booking conversion rate",
}

SCREENS = {
    "s1": """<!DOCTYPE html>
<html><head><title>Find flights</title>
<style>body{font-family:sans-serif;margin:0} header{background:#0d6efd;color:#fff;padding:16px}
label{display:block;margin:12px 16px;color:#787e85} button{margin:16px;width:90%}</style></head>
<body><header><h1>Find flights</h1></header>
<main><form>
<label>From <input name="from" value="San Francisco (SFO)"></label>
<label>To <input name="to" value="Tokyo (HND)"></label>
<label>Dates <input name="dates" value="Mar 3 - Mar 10"></label>
<label>Travelers <input name="travelers" value="1 adult"></label>
<button type="submit">Search</button>
</form></main>
<script>trackPageView('search')</script>
</body></html>""",
    "s2": """<!DOCTYPE html>
<html><head><title>Results</title>
<style>.card{background:#f1f3f5;border-radius:8px;margin:12px 16px;padding:12px}</style></head>
<body><header><h1>SFO to HND - 38 results</h1></header>
<nav><a href="#sort">Sort: Recommended</a> <a href="#filters">Filters</a></nav>
<ul class="results">
<li class="card"><h2>Sky Air</h2><p>10:40 - 14:55 +1, 11h 15m, Nonstop</p><span class="price">$812</span><button onclick="pick(1)">Select</button></li>
<li class="card"><h2>Pacific Jet</h2><p>10:40 - 14:55 +1, 11h 15m, Nonstop</p><span class="price">$845</span><button>Select</button></li>
<li class="card"><h2>Nippon Wings</h2><p>10:40 - 14:55 +1, 11h 15m, Nonstop</p><span class="price">$903</span><button>Select</button></li>
<li class="card"><h2>Blue Route</h2><p>10:40 - 14:55 +1, 11h 15m, Nonstop</p><span class="price">$921</span><button>Select</button></li>
</ul></body></html>""",
    "s3": """<!DOCTYPE html>
<html><head><title>Flight details</title></head>
<body><header><h1>Sky Air - Flight details</h1></header>
<section class="card">
<p>SFO 10:40 -&gt; HND 14:55 (+1)</p>
<p>Boeing 787, Economy, 1 checked bag</p>
<p class="rating">Rating 4.2 (1,204 reviews)</p>
<p class="price">$812 per traveler</p>
</section>
<button>Continue</button>
</body></html>""",
    "s4": """Here is the reconstructed screen:
```html
<!DOCTYPE html>
<html><head><title>Checkout</title></head>
<body><header><h1>Checkout</h1></header>
<form>
<label>Name <input name="name" value="Alex Kim"></label>
<label>Card <input name="card" value="**** **** **** 4242"></label>
</form>
<table class="summary"><tr><td>Fare</td><td>$812</td></tr><tr><td>Total due</td><td>$812</td></tr></table>
<button>Pay now</button>
</body></html>
```""",
}

KEYWORD_SCREENS = [
    (("price", "fee", "fees", "cost", "total", "fare", "fares"), ["s2", "s4"]),
    (("compare", "filter", "filters", "search", "result", "results"), ["s2"]),
    (("review", "reviews", "rating"), ["s3"]),
    (("cancellation", "terms", "checkout", "step", "steps"), ["s4"]),
]


def digest_int(text):
    return int(hashlib.sha256(text.encode("utf-8")).hexdigest()[:8], 16)


def tokens(text):
    words = re.findall(r"[a-z0-9]+", text.lower())
    out = []
    for w in words:
        if w in STOPWORDS or len(w) < 2:
            continue
        if len(w) > 4 and w.endswith("s"):
            w = w[:-1]
        out.append(w)
    return out


def embed(text):
    vec = [0.0] * EMBED_DIM
    toks = tokens(text)
    if not toks:
        # Absent dimensions embed the empty string; give it a fixed direction.
        toks = ["<empty>"]
    for t in toks:
        h = hashlib.sha256(t.encode("utf-8")).digest()
        for k in range(2):
            idx = int.from_bytes(h[4 * k:4 * k + 4], "big") % EMBED_DIM
            vec[idx] += 1.0 if h[8 + k] & 1 else -1.0
    norm = math.sqrt(sum(v * v for v in vec))
    if norm == 0.0:
        vec[0] = 1.0
        norm = 1.0
    return [round(v / norm, 6) for v in vec]


def first_words(text, n):
    words = text.rstrip(".").split()
    return " ".join(words[:n])


class Oracle:
    def __init__(self, truth):
        self.by_title = {p["title"]: p for p in truth}

    def paper(self, user_text):
        m = re.search(r"^Title: (.*)$", user_text, re.M)
        return self.by_title.get(m.group(1).strip()) if m else None

    def chat(self, stage, user_text):
        handler = getattr(self, "stage_" + stage, None)
        if handler is None:
            raise KeyError(stage)
        return handler(user_text)

    def stage_paper_context(self, text):
        p = self.paper(text)
        if p is None:
            return json.dumps({d: None for d in MOCKUP_CONTEXT})
        ctx = dict(p["context"])
        # Some answers abstain in words instead of null; both mean absent.
        if digest_int(p["title"]) % 3 == 0:
            ctx = {k: ("not mentioned" if v is None else v) for k, v in ctx.items()}
        body = json.dumps(ctx, indent=2)
        return f"```json\n{body}\n```" if digest_int(p["title"]) % 2 else body

    def stage_paper_implications(self, text):
        p = self.paper(text)
        return json.dumps(p["implications"] if p else [], indent=2)

    def stage_mockup_context(self, text):
        return json.dumps(MOCKUP_CONTEXT, indent=2)

    def stage_reconstruct_screen(self, text):
        m = re.search(r"Screen (s\d+)", text)
        return SCREENS.get(m.group(1) if m else "", "<p>Unreadable screen</p>")

    def stage_compare_contrast(self, text):
        payload = json.loads(text)
        designer = payload["designer_context"]
        lines = []
        seen = set()
        for imp in payload["implications"]:
            pid = imp["paper_id"]
            if pid in seen:
                continue
            seen.add(pid)
            ctx = payload["paper_contexts"].get(pid, {})
            shared = [d for d, v in ctx.items() if v and designer.get(d) and
                      set(tokens(v)) & set(tokens(designer[d]))]
            differ = [d for d, v in ctx.items() if v and designer.get(d) and d not in shared]
            lines.append(
                f"{imp['paper_title']} studied {ctx.get('target_user') or 'unspecified users'}. "
                f"It matches your project on {', '.join(shared) or 'no dimension'} and differs on "
                f"{', '.join(differ) or 'no dimension'}.")
        return "\n".join(lines)

    def stage_relations(self, text):
        payload = json.loads(text)
        rel = []
        for imp in payload["implications"]:
            ctx = imp.get("paper_context", {})
            who = ctx.get("target_user") or "the studied users"
            where = ctx.get("domain") or "the studied product"
            rel.append(f"\"{first_words(imp['text'], 6)}\" was observed for {who} in {where} and "
                       f"depends on how often they face that task.")
        return json.dumps({"reasoning": "Each implication is tied to its study population.",
                           "relations": rel}, indent=2)

    def stage_key_insights(self, text):
        payload = json.loads(text)
        imps = payload["implications"]
        closeness = payload["closeness"]
        closest = max(sorted(closeness), key=lambda k: closeness[k])
        parts = [imp["text"] for imp in imps[:3]]
        return (f"Across {len(imps)} findings, one theme recurs: " + " ".join(parts) +
                f" Where studies disagree, prefer paper {closest}, whose context is closest.")

    def stage_tailored_insight(self, text):
        payload = json.loads(text)
        d = payload["designer_context"]
        lead = payload["implications"][0]["text"].rstrip(".")
        lead = lead[0].lower() + lead[1:]
        return (f"For {d.get('target_user') or 'your users'} using your "
                f"{d.get('modality') or 'product'} for {d.get('domain') or 'this task'}, "
                f"{lead}. This directly addresses {d.get('pain_point') or 'the main pain point'}.")

    def stage_cluster_title(self, text):
        payload = json.loads(text)
        insight = payload["key_insights"].split(": ", 1)[-1]
        title = first_words(insight, 9)
        return f"\"{title}\"" if digest_int(title) % 2 else f"# {title}"

    def stage_action_items(self, text):
        payload = json.loads(text)
        imps = payload["implications"]
        items = []
        for imp in imps[:2]:
            words = set(tokens(imp["text"]))
            targets = []
            for keys, screens in KEYWORD_SCREENS:
                if words & set(keys):
                    targets += [s for s in screens if s not in targets]
            items.append({
                "text": f"Apply to the mockup: {imp['text']}",
                "target_screen_ids": targets or ["s1"],
                "visually_representable": True,
            })
        items.append({
            "text": "Validate the change with five target users before the next release.",
            "target_screen_ids": [],
            "visually_representable": False,
        })
        if digest_int(payload["title"]) % 4 == 0:
            # Occasionally reference a screen that does not exist.
            items[0]["target_screen_ids"] = items[0]["target_screen_ids"] + ["s9"]
        return json.dumps(items, indent=2)

    def stage_plan_edits(self, text):
        payload = json.loads(text)
        html = payload["screen_html"]
        item = payload["action_item"].replace("Apply to the mockup: ", "")
        ids = re.findall(r"<(\w+) id=\"([^\"]+)\"", html)
        heading = next((i for tag, i in ids if tag in ("h1", "h2")), None)
        buttons = [i for tag, i in ids if tag == "button"]
        edits = []
        if heading:
            edits.append({
                "op": "add",
                "reference_element_id": heading,
                "position": "after",
                "edited_element": f"<div class=\"insight-note\" style=\"background:#fff3cd;"
                                  f"padding:8px\">{item}</div>",
                "rationale": "Place the change where the user first looks.",
            })
        if buttons:
            label = "Review total and continue" if digest_int(item) % 2 else "Continue with full price"
            edits.append({
                "reference_element_id": buttons[-1],
                "edited_element": f"<button class=\"primary\">{label}</button>",
                "rationale": "Make the primary action reflect the change.",
            })
        return json.dumps(edits, indent=2)


class Handler(BaseHTTPRequestHandler):
    oracle = None

    def log_message(self, fmt, *args):
        pass

    def reply(self, status, body):
        data = json.dumps(body).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_POST(self):
        length = int(self.headers.get("Content-Length", "0"))
        req = json.loads(self.rfile.read(length) or b"{}")
        if self.path.endswith("/embeddings"):
            self.reply(200, {"object": "list",
                             "data": [{"index": 0, "embedding": embed(req.get("input", ""))}]})
            return
        if not self.path.endswith("/chat/completions"):
            self.reply(404, {"error": {"message": "unknown path"}})
            return
        system = next((m["content"] for m in req["messages"] if m["role"] == "system"), "")
        m = re.match(r"\[refine:([a-z_]+)@v\d+\]", system)
        user = next(m2 for m2 in req["messages"] if m2["role"] == "user")["content"]
        text = "\n".join(p["text"] for p in user if p.get("type") == "text")
        try:
            content = self.oracle.chat(m.group(1) if m else "", text)
        except (KeyError, ValueError) as e:
            self.reply(400, {"error": {"message": f"mock cannot answer: {e}"}})
            return
        self.reply(200, {"object": "chat.completion",
                         "choices": [{"index": 0, "finish_reason": "stop",
                                      "message": {"role": "assistant", "content": content}}]})


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--port", type=int, default=8765)
    ap.add_argument("--truth", default="tests/data/corpus/ground_truth.json")
    args = ap.parse_args()
    with open(args.truth, encoding="utf-8") as f:
        Handler.oracle = Oracle(json.load(f))
    server = ThreadingHTTPServer(("127.0.0.1", args.port), Handler)
    print(f"mock provider on http://127.0.0.1:{args.port}/v1", flush=True)
    server.serve_forever()


if __name__ == "__main__":
    main()
