#!/usr/bin/env python3
"""Generates the DOM edit corpus: screen HTML, an edit list and the expected
element structure after the edits are applied.

    python3 tools/fixtures/make_edit_corpus.py tests/data/edits

Documents and fragments are built from small trees, so the expected result
comes from applying each edit to the tree model here rather than from the C++
implementation.
"""

import copy
import json
import random
import sys
from pathlib import Path

SEED = 20240921
COUNT = 50


class El:
    def __init__(self, tag, id=None, text=None, attrs=None, children=None):
        self.tag = tag
        self.id = id
        self.text = text
        self.attrs = attrs or {}
        self.children = children or []

    def html(self):
        attrs = "".join(f' {k}="{v}"' for k, v in self.attrs.items())
        if self.id:
            attrs = f' id="{self.id}"' + attrs
        if self.tag in ("img", "input", "br", "hr"):
            return f"<{self.tag}{attrs}>"
        inner = (self.text or "") + "".join(c.html() for c in self.children)
        return f"<{self.tag}{attrs}>{inner}</{self.tag}>"


def screen(kind):
    """Id-complete screens, like post-reconstruction HTML."""
    if kind == "search":
        return El("main", "root", children=[
            El("header", "hdr", children=[El("h1", "title", "Find flights"),
                                          El("button", "menu", "Menu")]),
            El("form", "search", children=[
                El("label", "from-label", "From"),
                El("input", "from", attrs={"type": "text", "placeholder": "City"}),
                El("label", "to-label", "To"),
                El("input", "to", attrs={"type": "text"}),
                El("div", "dates", children=[El("input", "depart", attrs={"type": "date"}),
                                             El("input", "return", attrs={"type": "date"})]),
                El("button", "go", "Search")]),
            El("footer", "foot", children=[El("p", "legal", "Prices in EUR")])])
    if kind == "results":
        cards = []
        for i in range(4):
            cards.append(El("li", f"r{i}", children=[
                El("span", f"r{i}-air", f"Airline {i}"),
                El("span", f"r{i}-price", f"{120 + 35 * i} EUR"),
                El("button", f"r{i}-pick", "Select")]))
        return El("main", "root", children=[
            El("h2", "count", "4 flights"),
            El("div", "filters", children=[El("button", "f-stops", "Stops"),
                                           El("button", "f-time", "Times")]),
            El("ul", "list", children=cards)])
    if kind == "details":
        return El("main", "root", children=[
            El("section", "summary", children=[El("h2", "route", "BER to LIS"),
                                               El("p", "times", "08:10 to 10:45")]),
            El("section", "fare", children=[El("h3", "fare-title", "Basic fare"),
                                            El("ul", "perks", children=[
                                                El("li", "bag", "1 cabin bag"),
                                                El("li", "seat", "Seat at random")])]),
            El("button", "continue", "Continue")])
    return El("main", "root", children=[
        El("h2", "pay-title", "Payment"),
        El("form", "pay", children=[El("input", "card", attrs={"type": "text"}),
                                    El("input", "cvc", attrs={"type": "text"}),
                                    El("label", "save-label", "Save card")]),
        El("div", "totals", children=[El("span", "total-label", "Total"),
                                      El("span", "total", "240 EUR")]),
        El("button", "pay-now", "Pay now")])


VOID = {"img", "input", "br", "hr"}


def walk(el, parent=None):
    yield el, parent
    for c in el.children:
        yield from walk(c, el)


def ids_of(el):
    return {e.id for e, _ in walk(el) if e.id}


def find(root, id_):
    for e, p in walk(root):
        if e.id == id_:
            return e, p
    raise KeyError(id_)


class Gen:
    def __init__(self, rng):
        self.rng = rng
        self.fresh = 0

    def new_id(self):
        self.fresh += 1
        return f"new{self.fresh}"

    def fragment(self, with_id=True, nested=False, script=False, handler=False):
        # No <p>: a <p> placed inside another <p> is not representable in HTML.
        tag = self.rng.choice(["div", "aside", "span", "button", "section"])
        label = self.rng.choice(["Total incl. fees", "Free cancellation", "Compare",
                                 "Pin this fare", "Price alert", "Refund terms"])
        attrs = {"class": "hint"}
        if handler:
            attrs["onclick"] = "track()"
        el = El(tag, self.new_id() if with_id else None, label if not nested else None, attrs)
        if nested:
            el.children = [El("strong", self.new_id(), label),
                           El("em", self.new_id(), "new")]
        if script:
            el.children.append(El("script", None, "alert(1)"))
        return el


def apply(root, edit, frag):
    """Applies one edit to the tree model."""
    ref, parent = find(root, edit["reference_element_id"])
    op = edit.get("op", "replace").lower()
    if op == "remove":
        parent.children.remove(ref)
        return
    frag = copy.deepcopy(frag)
    frag.children = [c for c in frag.children if c.tag != "script"]  # sanitized away
    taken = ids_of(root)
    if op == "replace":
        taken -= ids_of(ref)
        if frag.id is None:
            frag.id = ref.id
    # Fragment ids already used elsewhere (or twice in the fragment) are dropped.
    for e, _ in walk(frag):
        if e.id in taken:
            e.id = None
        elif e.id:
            taken.add(e.id)
    if op == "replace":
        i = parent.children.index(ref)
        parent.children[i] = frag
        return
    pos = edit["position"].lower()
    if pos == "before":
        parent.children.insert(parent.children.index(ref), frag)
    elif pos == "after":
        parent.children.insert(parent.children.index(ref) + 1, frag)
    elif pos == "first_child":
        ref.children.insert(0, frag)
    else:
        ref.children.append(frag)


def candidates(root, containers_only=False):
    out = []
    for e, p in walk(root):
        if p is None or not e.id:
            continue
        if containers_only and e.tag in VOID:
            continue
        out.append(e)
    return out


def make_item(n, rng):
    g = Gen(rng)
    kind = ["search", "results", "details", "checkout"][n % 4]
    root = screen(kind)
    html = root.html()
    model = copy.deepcopy(root)
    edits = []
    forbidden = []
    notes = []
    steps = 1 + (n % 3) if n >= 20 else 1
    for step in range(steps):
        scenario = (n + step * 7) % 9
        targets = candidates(model)
        ref = rng.choice(targets)
        edit = {"reference_element_id": ref.id, "rationale": f"step {step}"}
        frag = None
        if scenario == 0:
            edit["op"] = "remove"
            notes.append("remove")
        elif scenario == 1:
            frag = g.fragment(with_id=False)
            edit["op"] = "replace"
            notes.append("replace inheriting the id")
        elif scenario == 2:
            frag = g.fragment(nested=True)
            edit["op"] = rng.choice(["replace", "Replace"])
            notes.append("replace with nested fragment")
        elif scenario == 3:
            frag = g.fragment()
            notes.append("op omitted, reads as replace")
        elif scenario in (4, 5):
            if scenario == 5:
                ref = rng.choice(candidates(model, containers_only=True))
                edit["reference_element_id"] = ref.id
            frag = g.fragment(nested=rng.random() < 0.3)
            if scenario == 4 and rng.random() < 0.4:
                # Colliding id: the existing element keeps it.
                frag.id = rng.choice(sorted(ids_of(model) - {ref.id}))
                notes.append("fragment id collides")
            edit["op"] = "add"
            edit["position"] = (["before", "after"] if scenario == 4
                                else ["first_child", "last_child", "LAST_CHILD"])[rng.randrange(2 if scenario == 4 else 3)]
            notes.append(f"add {edit['position'].lower()}")
        elif scenario == 6:
            frag = g.fragment(script=True, handler=True)
            edit["op"] = "add"
            edit["position"] = "after"
            forbidden += ["<script", "onclick", "alert(1)"]
            notes.append("add with active content")
        elif scenario == 7:
            # Chained: the second edit targets an element created by the first.
            ref = rng.choice(candidates(model, containers_only=True))
            first = g.fragment()
            e1 = {"op": "add", "reference_element_id": ref.id, "position": "last_child",
                  "rationale": "container", "edited_element": first.html()}
            apply(model, e1, first)
            edits.append(e1)
            frag = g.fragment()
            edit = {"op": "add", "reference_element_id": first.id, "position": "before",
                    "rationale": f"step {step}"}
            notes.append("chained add")
        else:
            ref = rng.choice(candidates(model, containers_only=True))
            edit = {"op": "replace", "reference_element_id": ref.id, "rationale": f"step {step}"}
            frag = El(ref.tag, None, "Updated", {"class": "changed"})
            notes.append("replace keeping tag")
        if frag is not None:
            edit["edited_element"] = frag.html()
        apply(model, edit, frag)
        edits.append(edit)

    structure = {}
    for e, p in walk(model):
        if p is None or not e.id:
            continue
        siblings = [c for c in p.children]
        structure[e.id] = {"parent": p.id, "tag": e.tag, "index": siblings.index(e)}
    structure[model.id] = {"parent": None, "tag": model.tag, "index": 0}
    texts = {e.id: e.text for e, _ in walk(model) if e.id and e.text and not e.children}
    absent = sorted(ids_of(root) - ids_of(model))
    return {
        "name": f"edit-{n:02d}-{kind}",
        "description": "; ".join(notes),
        "html": html,
        "edits": edits,
        "expect": {
            "structure": structure,
            "absent": absent,
            "texts": texts,
            "element_count": sum(1 for _ in walk(model)),
            "forbidden": sorted(set(forbidden)),
        },
    }


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "tests/data/edits")
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(SEED)
    for n in range(COUNT):
        item = make_item(n, rng)
        (out / f"{item['name']}.json").write_text(json.dumps(item, indent=2, ensure_ascii=False) + "\n")
    print(f"wrote {COUNT} edit items to {out}")


if __name__ == "__main__":
    main()
