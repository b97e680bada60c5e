#!/usr/bin/env python3
"""Generates the dump-slice fixtures and prints expected ingest counts.

The counting here is an independent oracle: it re-reads the generated XML
with xml.etree and reapplies the filter rules (language tag match, >=1 code
block, >=1 comment) with its own logic, so the C++ pipeline can be checked
against numbers this script prints.
"""

import json
import re
import xml.etree.ElementTree as ET
from xml.sax.saxutils import quoteattr

OUT_POSTS = "posts_fixture.xml"
OUT_COMMENTS = "comments_fixture.xml"

GENERIC_QUESTIONS = 99         # ids 101..199
GENERIC_ANSWERS = 895          # ids 10000..10894
SPECIAL_QUESTION = 61307000
SPECIAL_ANSWER = 61307412

SECURITY_COMMENTS = [
    "This is vulnerable to SQL injection when user input is concatenated.",
    "Don't use eval here, it is a security risk.",
    "This API is deprecated since 2.0, use the safe variant.",
    "Careful: this can leak credentials in plaintext logs.",
]
PLAIN_COMMENTS = [
    "Thanks, works great!",
    "Nice one-liner, saved my day.",
    "Could you add an example for Windows? See https://example.org/windows-docs",
    "You can also email me at helper@example.com for the full script.",
]

BODIES = [
    # 0: pre/code block plus a URL in prose
    '<p>Try this, docs at http://example.com/subprocess:</p>'
    '<pre><code>import os\nos.system("ls -la")</code></pre>',
    # 1: no code at all
    '<p>Just read the tutorial at https://example.com/tutorial first.</p>',
    # 2: inline code with entities plus an email
    '<p>Use <code>if x &lt; y: swap(x, y)</code> or mail me@example.com</p>',
    # 3: nested pre>code plus a second inline span (two blocks, ordered)
    '<p>First block:</p><pre><code>a = 1\nb = 2</code></pre>'
    '<p>then <code>print(a + b)</code> runs last.</p>',
    # 4: code plus bare www URL and an unclosed tag
    '<p>See www.example.net/ref <b>bold text'
    '<pre><code>cursor.execute(query, params)</code></pre>',
]


def q_tags(qid):
    if qid == SPECIAL_QUESTION:
        return "<python><flask>"
    i = qid - 101
    if i % 10 == 9:
        return "<python><flask>"
    return "<python>" if i % 2 == 0 else "<java>"


def xml_row(attrs):
    parts = " ".join(f"{k}={quoteattr(str(v))}" for k, v in attrs.items())
    return f"  <row {parts} />"


def make_posts():
    rows = []
    for qid in range(101, 101 + GENERIC_QUESTIONS):
        rows.append(xml_row({
            "Id": qid, "PostTypeId": 1, "Tags": q_tags(qid),
            "Body": f"<p>Question {qid}: how do I do this?</p>", "Score": qid % 7,
        }))
    rows.append(xml_row({
        "Id": SPECIAL_QUESTION, "PostTypeId": 1, "Tags": q_tags(SPECIAL_QUESTION),
        "Body": "<p>How do I run a bash command from a Flask route?</p>", "Score": 12,
    }))

    for j in range(GENERIC_ANSWERS):
        aid = 10000 + j
        parent = 101 + (j % GENERIC_QUESTIONS)
        rows.append(xml_row({
            "Id": aid, "PostTypeId": 2, "ParentId": parent,
            "Body": BODIES[j % 5], "Score": j % 11 - 2,
        }))
    rows.append(xml_row({
        "Id": SPECIAL_ANSWER, "PostTypeId": 2, "ParentId": SPECIAL_QUESTION,
        "Body": (
            "<p>You can run the command like this:</p>"
            "<pre><code>@app.route('/execute')\n"
            "def execute():\n"
            "    command = request.args.get('command')\n"
            "    subprocess.call(command, shell=True)\n"
            "    return 'done'\n</code></pre>"
        ),
        "Score": 42,
    }))
    # valid answer whose parent is absent from this slice
    rows.append(xml_row({
        "Id": 999100, "PostTypeId": 2, "ParentId": 99999,
        "Body": '<p>Orphan answer.</p><pre><code>print("hi")</code></pre>', "Score": 1,
    }))

    # three corrupted rows: well-formed XML, unusable mandatory attributes
    corrupted = [
        xml_row({"Id": "oops", "PostTypeId": 1, "Tags": "<python>", "Body": "<p>bad id</p>"}),
        xml_row({"Id": 999001, "Body": "<p>missing post type</p>"}),
        xml_row({"Id": 999002, "PostTypeId": 2, "Body": "<p>answer without parent id</p>"}),
    ]
    rows.insert(150, corrupted[0])
    rows.insert(400, corrupted[1])
    rows.insert(800, corrupted[2])

    return "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<posts>\n" + "\n".join(rows) + "\n</posts>\n"


def make_comments():
    rows = []
    cid = 1
    rows.append(xml_row({
        "Id": cid, "PostId": SPECIAL_ANSWER,
        "Text": "Don't use shell=True to run commands, it opens the program to "
                "command injection vulnerabilities.",
    }))
    cid += 1
    rows.append(xml_row({"Id": cid, "PostId": SPECIAL_ANSWER, "Text": "Thanks, this helped!"}))
    cid += 1

    for j in range(GENERIC_ANSWERS):
        aid = 10000 + j
        if j % 10 == 3:
            continue  # no comments at all
        if j % 3 == 0:
            rows.append(xml_row({"Id": cid, "PostId": aid,
                                 "Text": SECURITY_COMMENTS[j % len(SECURITY_COMMENTS)]}))
            cid += 1
        rows.append(xml_row({"Id": cid, "PostId": aid,
                             "Text": PLAIN_COMMENTS[j % len(PLAIN_COMMENTS)]}))
        cid += 1

    # comments pointing at posts outside the slice
    for extra in range(3):
        rows.append(xml_row({"Id": cid, "PostId": 55555 + extra, "Text": "Dangling comment."}))
        cid += 1

    # two corrupted comment rows
    rows.insert(100, xml_row({"Id": cid, "Text": "missing post id"}))
    rows.insert(500, xml_row({"Id": "badid", "PostId": 10007, "Text": "bad comment id"}))

    return "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<comments>\n" + "\n".join(rows) + "\n</comments>\n"


def count_code_blocks(body_html):
    # oracle-side reading of the "code blocks" rule: top-level <code> spans
    return len(re.findall(r"<code[\s>/]", body_html, flags=re.IGNORECASE))


def oracle_counts(posts_xml, comments_xml, language):
    posts = ET.fromstring(posts_xml)
    comments = ET.fromstring(comments_xml)

    q_tagsets = {}
    answers = []
    skipped = 0
    for row in posts:
        attrs = row.attrib
        try:
            pid = int(attrs["Id"])
            ptype = int(attrs["PostTypeId"])
        except (KeyError, ValueError):
            skipped += 1
            continue
        if ptype == 1:
            tags = re.findall(r"<([^>]+)>", attrs.get("Tags", ""))
            q_tagsets[pid] = {t.lower() for t in tags}
        elif ptype == 2:
            if "ParentId" not in attrs:
                skipped += 1
                continue
            answers.append((pid, int(attrs["ParentId"]), attrs.get("Body", "")))

    comment_count = {}
    for row in comments:
        attrs = row.attrib
        try:
            int(attrs["Id"])
            post_id = int(attrs["PostId"])
        except (KeyError, ValueError):
            continue
        comment_count[post_id] = comment_count.get(post_id, 0) + 1

    emitted = 0
    missing_parent = 0
    language_filtered = 0
    no_code = 0
    no_comment = 0
    for aid, parent, body in answers:
        if parent not in q_tagsets:
            missing_parent += 1
            continue
        if language not in q_tagsets[parent]:
            language_filtered += 1
            continue
        if count_code_blocks(body) == 0:
            no_code += 1
            continue
        if comment_count.get(aid, 0) == 0:
            no_comment += 1
            continue
        emitted += 1

    return {
        "posts_rows": len(list(posts)),
        "posts_skipped": skipped,
        "posts_yielded": len(list(posts)) - skipped,
        "answers": len(answers),
        "questions": len(q_tagsets),
        "answers_missing_parent": missing_parent,
        "answers_language_filtered": language_filtered,
        "answers_dropped_no_code": no_code,
        "answers_dropped_no_comment": no_comment,
        "answers_emitted": emitted,
    }


def main():
    posts = make_posts()
    comments = make_comments()
    with open(OUT_POSTS, "w", encoding="utf-8") as f:
        f.write(posts)
    with open(OUT_COMMENTS, "w", encoding="utf-8") as f:
        f.write(comments)
    print(json.dumps(oracle_counts(posts, comments, "python"), indent=2))


if __name__ == "__main__":
    main()
