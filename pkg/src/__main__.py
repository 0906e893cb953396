from src.cli.app import main

main()
