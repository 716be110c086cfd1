#!/usr/bin/env python3
"""Draws the four travel-booking mockup screens used by the golden pipeline.

    python3 tools/fixtures/make_screens.py tests/data/mockup
"""

import sys
from pathlib import Path

from PIL import Image, ImageDraw

W, H = 360, 640
INK = (33, 37, 41)
MUTED = (120, 126, 133)
ACCENT = (13, 110, 253)
CARD = (241, 243, 245)


def header(d, title):
    d.rectangle([0, 0, W, 56], fill=ACCENT)
    d.text((16, 20), title, fill=(255, 255, 255))


def button(d, y, label):
    d.rounded_rectangle([16, y, W - 16, y + 44], radius=8, fill=ACCENT)
    d.text((W // 2 - 4 * len(label), y + 16), label, fill=(255, 255, 255))


def field(d, y, label, value):
    d.text((16, y), label, fill=MUTED)
    d.rectangle([16, y + 16, W - 16, y + 48], outline=MUTED)
    d.text((24, y + 26), value, fill=INK)


def search(d):
    header(d, "Find flights")
    field(d, 80, "From", "San Francisco (SFO)")
    field(d, 140, "To", "Tokyo (HND)")
    field(d, 200, "Dates", "Mar 3 - Mar 10")
    field(d, 260, "Travelers", "1 adult")
    button(d, 330, "Search")


def results(d):
    header(d, "SFO to HND - 38 results")
    d.text((16, 68), "Sort: Recommended   Filters", fill=ACCENT)
    for i, (airline, price) in enumerate([("Sky Air", "$812"), ("Pacific Jet", "$845"),
                                          ("Nippon Wings", "$903"), ("Blue Route", "$921")]):
        y = 96 + i * 112
        d.rounded_rectangle([16, y, W - 16, y + 96], radius=8, fill=CARD)
        d.text((28, y + 12), airline, fill=INK)
        d.text((28, y + 36), "10:40 - 14:55 +1   11h 15m   Nonstop", fill=MUTED)
        d.text((W - 80, y + 12), price, fill=INK)
        d.text((28, y + 64), "Select", fill=ACCENT)


def details(d):
    header(d, "Sky Air - Flight details")
    d.rounded_rectangle([16, 72, W - 16, 232], radius=8, fill=CARD)
    d.text((28, 88), "SFO 10:40  ->  HND 14:55 (+1)", fill=INK)
    d.text((28, 112), "Boeing 787   Economy   1 checked bag", fill=MUTED)
    d.text((28, 136), "Rating 4.2 (1,204 reviews)", fill=MUTED)
    d.text((28, 184), "$812 per traveler", fill=INK)
    button(d, 260, "Continue")


def checkout(d):
    header(d, "Checkout")
    field(d, 80, "Name", "Alex Kim")
    field(d, 140, "Card", "**** **** **** 4242")
    d.text((16, 210), "Fare            $812", fill=INK)
    d.text((16, 234), "Total due       $812", fill=INK)
    button(d, 280, "Pay now")


SCREENS = [("s1_search.png", search), ("s2_results.png", results),
           ("s3_details.png", details), ("s4_checkout.png", checkout)]


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "tests/data/mockup")
    out.mkdir(parents=True, exist_ok=True)
    for name, draw in SCREENS:
        img = Image.new("RGB", (W, H), (255, 255, 255))
        draw(ImageDraw.Draw(img))
        img.save(out / name, format="PNG", optimize=False)
    print(f"wrote {len(SCREENS)} screens to {out}")


if __name__ == "__main__":
    main()
