"""Regenerates data/fixtures/syllables_en.tsv with pyphen (left=2, right=3)."""
import sys
import pyphen

WORDS = """
unconstitutional hyphenation computer language network mathematics
university information government president committee development
interesting probability beautiful yesterday understanding communication
international technology organization environment democratic necessary
particular relationship electricity philosophy representative photograph
education vocabulary table window garden mother father water
morning evening company market program present service business
national economic financial political
""".split()


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else "data/fixtures/syllables_en.tsv"
    dic = pyphen.Pyphen(lang="en_US", left=2, right=3)
    assert len(WORDS) == 50, len(WORDS)
    with open(out, "w") as f:
        for w in WORDS:
            f.write(w + "\t" + " ".join(dic.inserted(w).split("-")) + "\n")


if __name__ == "__main__":
    main()
