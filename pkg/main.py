from app import cli

# Entry point for `python main.py ...`; the splitree console script calls cli directly

if __name__ == "__main__":
    cli()
